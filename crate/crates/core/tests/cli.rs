//! Black-box tests of the `fluxread` binary: exit codes, stdout shape, and
//! determinism of the files it writes.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn fluxread(out_root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluxread"))
        .args(args)
        .env("FLUXREAD_OUT_DIR", out_root)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn defaults_toml(root: &Path, experiment: &str) -> String {
    let out = fluxread(root, &["list-experiments", "--defaults", experiment]);
    assert!(out.status.success(), "defaults dump failed: {}", stderr(&out));
    stdout(&out)
}

#[test]
fn list_experiments_prints_the_registry() {
    let root = TempDir::new().unwrap();
    let out = fluxread(root.path(), &["list-experiments"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for name in ["fig2", "fig3", "fig4a", "fig4b", "fig4cd", "fig5", "fig6", "figA3", "figA5", "custom"] {
        assert!(text.contains(name), "registry listing misses {name}:\n{text}");
    }

    let out = fluxread(root.path(), &["list-experiments", "--defaults", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nonsense"));
}

#[test]
fn validate_accepts_defaults_and_reports_misspelled_keys() {
    let root = TempDir::new().unwrap();
    let good = root.path().join("fig2.toml");
    std::fs::write(&good, defaults_toml(root.path(), "fig2")).unwrap();

    let out = fluxread(root.path(), &["validate", good.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("ok: schema valid (fig2)"), "{text}");
    assert!(text.contains("all checks pass"), "{text}");

    // One dropped letter in a key must surface by name. Schema findings are
    // the product of `validate`, so it still exits 0; `run` must refuse with
    // the config exit code.
    let bad = root.path().join("typo.toml");
    let text = defaults_toml(root.path(), "fig2").replacen("kappa_over_2pi_mhz", "kapa_over_2pi_mhz", 1);
    std::fs::write(&bad, text).unwrap();

    let out = fluxread(root.path(), &["validate", bad.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("finding:"));
    assert!(stdout(&out).contains("kapa"), "typo not named: {}", stdout(&out));

    let out = fluxread(root.path(), &["run", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("kapa"), "typo not named: {}", stderr(&out));
}

#[test]
fn run_writes_csv_manifest_and_plot_script() {
    let root = TempDir::new().unwrap();
    let cfg = root.path().join("fig2.toml");
    std::fs::write(&cfg, defaults_toml(root.path(), "fig2")).unwrap();

    let out = fluxread(root.path(), &["run", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("wrote "));

    let dir = root.path().join("fig2");
    let csv = std::fs::read_to_string(dir.join("fig2_sensitivity.csv")).unwrap();
    assert!(csv.starts_with("flux_phi0,"));
    assert!(csv.lines().count() > 90, "default flux grid expected");
    let manifest = std::fs::read_to_string(dir.join("manifest.toml")).unwrap();
    assert!(manifest.contains("experiment = \"fig2\""));
    assert!(manifest.contains("config_sha256"));
    assert!(dir.join("fig2.gp").exists());
}

#[test]
fn sweeps_take_explicit_grids_and_stay_deterministic() {
    let roots = [TempDir::new().unwrap(), TempDir::new().unwrap()];
    let mut texts = Vec::new();
    for (root, workers) in roots.iter().zip(["1", "8"]) {
        let cfg_text = defaults_toml(root.path(), "figA3")
            .replacen("workers = 1", &format!("workers = {workers}"), 1);
        assert!(cfg_text.contains(&format!("workers = {workers}")));
        let cfg = root.path().join("figA3.toml");
        std::fs::write(&cfg, cfg_text).unwrap();

        let out = fluxread(
            root.path(),
            &["sweep", cfg.to_str().unwrap(), "--field", "f_alpha", "--values", "0.0,0.1"],
        );
        assert!(out.status.success(), "{}", stderr(&out));
        texts.push(std::fs::read_to_string(root.path().join("figA3").join("figA3_qubit.csv")).unwrap());
    }
    assert_eq!(texts[0], texts[1], "worker count changed the bytes");
    assert_eq!(texts[0].lines().count(), 3, "header plus one row per grid value");
}

#[test]
fn empty_sweep_leaves_a_header_only_csv() {
    let root = TempDir::new().unwrap();
    let cfg = root.path().join("fig2.toml");
    std::fs::write(&cfg, defaults_toml(root.path(), "fig2")).unwrap();

    let out = fluxread(
        root.path(),
        &["sweep", cfg.to_str().unwrap(), "--field", "flux_phi0", "--values", ""],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(root.path().join("fig2").join("fig2_sensitivity.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1, "expected only the header:\n{csv}");
}

#[test]
fn sweep_rejects_wrong_axis_and_unknown_fields() {
    let root = TempDir::new().unwrap();
    let cfg = root.path().join("fig2.toml");
    std::fs::write(&cfg, defaults_toml(root.path(), "fig2")).unwrap();

    let out = fluxread(
        root.path(),
        &["sweep", cfg.to_str().unwrap(), "--field", "kappa_tau", "--values", "1.0"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sweeps over"), "{}", stderr(&out));

    let out = fluxread(
        root.path(),
        &["sweep", cfg.to_str().unwrap(), "--field", "voltage", "--values", "1.0"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("voltage"));

    let out = fluxread(
        root.path(),
        &["sweep", cfg.to_str().unwrap(), "--field", "flux_phi0", "--start", "0.1"],
    );
    // Incomplete uniform-grid flags are a usage error from the parser itself.
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_a_config_error_naming_the_path() {
    let root = TempDir::new().unwrap();
    let out = fluxread(root.path(), &["run", "/does/not/exist.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/does/not/exist.toml"));
}

#[test]
fn uniform_grid_flags_match_explicit_values() {
    let root = TempDir::new().unwrap();
    let cfg = root.path().join("fig2.toml");
    std::fs::write(&cfg, defaults_toml(root.path(), "fig2")).unwrap();

    let out = fluxread(
        root.path(),
        &["sweep", cfg.to_str().unwrap(), "--field", "flux_phi0", "--start", "0.1", "--stop", "0.3", "--points", "3"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let uniform = std::fs::read_to_string(root.path().join("fig2").join("fig2_sensitivity.csv")).unwrap();

    let out = fluxread(
        root.path(),
        &["sweep", cfg.to_str().unwrap(), "--field", "flux_phi0", "--values", "0.1,0.2,0.3"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let explicit = std::fs::read_to_string(root.path().join("fig2").join("fig2_sensitivity.csv")).unwrap();
    assert_eq!(uniform, explicit);
}
