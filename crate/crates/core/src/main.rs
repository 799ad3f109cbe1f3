//! Thin command-line front end over the experiment runner. All the logic
//! lives in the library; this file only parses arguments, maps errors to exit
//! codes (2 for config problems, 3 for numerical failures), and prints.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fluxread::experiment::{
    default_config, lint_config, load_config, run_experiment, serialize_config, ExperimentError,
    ExperimentKind, RunReport, Severity, SweepField, SweepSpec,
};

#[derive(Parser)]
#[command(
    name = "fluxread",
    version,
    about = "Flux-qubit dispersive-readout experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment from a TOML config file.
    Run {
        config: PathBuf,
    },
    /// Run an experiment with its scan grid replaced by explicit values.
    Sweep {
        config: PathBuf,
        /// Sweepable field: epsilon_over_kappa, f_alpha, flux_phi0, kappa_tau.
        #[arg(long)]
        field: String,
        /// Comma-separated grid values; an empty string is an empty grid.
        #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["start", "stop", "points"])]
        values: Option<String>,
        /// Uniform-grid alternative to --values.
        #[arg(long, requires = "stop", requires = "points")]
        start: Option<f64>,
        #[arg(long)]
        stop: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Schema check plus physics lint of a config file.
    Validate {
        config: PathBuf,
    },
    /// List the experiment registry.
    ListExperiments {
        /// Print the full default config for one experiment instead.
        #[arg(long, value_name = "EXPERIMENT")]
        defaults: Option<String>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                ExperimentError::Config(_) => ExitCode::from(2),
                ExperimentError::Numerics(_) => ExitCode::from(3),
                ExperimentError::Io(_) => ExitCode::FAILURE,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            print_report(&run_experiment(&cfg, None)?);
            Ok(())
        }
        Command::Sweep {
            config,
            field,
            values,
            start,
            stop,
            points,
        } => {
            let cfg = load_config(&config)?;
            let field = SweepField::from_name(&field).ok_or_else(|| {
                ExperimentError::Config(format!(
                    "unknown sweep field `{field}`; expected one of epsilon_over_kappa, f_alpha, flux_phi0, kappa_tau"
                ))
            })?;
            let values = sweep_values(values, start, stop, points)?;
            print_report(&run_experiment(&cfg, Some(&SweepSpec { field, values }))?);
            Ok(())
        }
        Command::Validate { config } => {
            match load_config(&config) {
                Ok(cfg) => {
                    println!("ok: schema valid ({})", cfg.experiment.name());
                    let mut warnings = 0;
                    for finding in lint_config(&cfg) {
                        match finding.severity {
                            Severity::Pass => println!("ok: {}", finding.message),
                            Severity::Warning => {
                                warnings += 1;
                                println!("warning: {}", finding.message);
                            }
                        }
                    }
                    println!(
                        "{}",
                        if warnings == 0 {
                            "all checks pass".to_string()
                        } else {
                            format!("{warnings} warning(s)")
                        }
                    );
                }
                // Validation reports rather than fails: findings are the output.
                Err(e) => println!("finding: {e}"),
            }
            Ok(())
        }
        Command::ListExperiments { defaults } => {
            if let Some(name) = defaults {
                let kind = ExperimentKind::from_name(&name).ok_or_else(|| {
                    ExperimentError::Config(format!("unknown experiment `{name}`"))
                })?;
                print!("{}", serialize_config(&default_config(kind)));
            } else {
                for kind in ExperimentKind::ALL {
                    println!("{:<8} {}", kind.name(), kind.describe());
                }
            }
            Ok(())
        }
    }
}

fn sweep_values(
    values: Option<String>,
    start: Option<f64>,
    stop: Option<f64>,
    points: Option<usize>,
) -> Result<Vec<f64>, ExperimentError> {
    if let Some(text) = values {
        if text.trim().is_empty() {
            return Ok(Vec::new());
        }
        return text
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| ExperimentError::Config(format!("bad sweep value `{v}`")))
            })
            .collect();
    }
    match (start, stop, points) {
        (Some(a), Some(b), Some(n)) => {
            if n == 0 {
                return Ok(Vec::new());
            }
            Ok((0..n)
                .map(|i| a + (b - a) * i as f64 / (n - 1).max(1) as f64)
                .collect())
        }
        _ => Err(ExperimentError::Config(
            "sweep needs either --values or --start/--stop/--points".into(),
        )),
    }
}

fn print_report(report: &RunReport) {
    for name in &report.outputs {
        println!("wrote {}", report.out_dir.join(name).display());
    }
    let failed = report.failed_tasks();
    if failed > 0 {
        println!(
            "{failed} of {} task(s) failed; see manifest.toml",
            report.tasks.len()
        );
    }
}
