//! Scale the architecture up: several qubits dispersively coupled to one
//! line give one pointer state per joint spin configuration, and several
//! SQUIDs in the line add their Kerr coefficients.

use fluxread::consts::{ang_ghz, ang_mhz, to_hz};
use fluxread::protocol::joint_pointer_states;
use fluxread::resonator::{multi_squid_summary, ResonatorSpec, SquidSpec};

fn main() {
    let kappa = ang_mhz(16.0);
    let chi0 = ang_mhz(4.0);

    println!("pointer states of two qubits with chi_1 = chi_0, chi_2 = chi_0/2:");
    println!("sigma_z      shift/chi_0  angle (deg)  |alpha_ss|");
    for p in joint_pointer_states(&[chi0, chi0 / 2.0], kappa, kappa, 0.0).unwrap() {
        println!(
            "{:<12} {:<12.1} {:<12.2} {:.3}",
            format!("{:?}", p.sigma_z),
            p.dispersive_shift / chi0,
            p.rotation_angle.to_degrees(),
            p.steady_amplitude.norm()
        );
    }
    println!(
        "Four resolvable angles from two qubits: single-shot multiplexed \
         readout on one feed line."
    );

    println!();
    let squid = SquidSpec::symmetric(ang_ghz(2500.0));
    for count in 1..=3 {
        let res = ResonatorSpec::quarter_wave(
            ang_ghz(6.0),
            10e-9,
            kappa,
            vec![squid; count],
        )
        .unwrap();
        let summary = multi_squid_summary(&res, &vec![0.3; count]).unwrap();
        println!(
            "{count} SQUID(s) at f = 0.30: omega_r/2pi = {:.4} GHz, total |K|/2pi = {:.3} kHz",
            to_hz(summary.omega_r0) / 1e9,
            to_hz(summary.kerr_total).abs() / 1e3
        );
    }
    println!("The Kerr budget grows linearly with the SQUID count.");
}
