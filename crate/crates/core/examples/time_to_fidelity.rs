//! How long must the record integrate before four-nines assignment, as a
//! function of drive strength, and over what drive window is the target
//! reachable at all.

use fluxread::consts::{ang_mhz, TWO_PI};
use fluxread::protocol::{drive_bounds, time_to_fidelity, ProtocolError};
use fluxread::readout::{Mechanism, ReadoutScenario};

fn scenario(mechanism: Mechanism, eps_over_kappa: f64) -> ReadoutScenario {
    let kappa = ang_mhz(16.0);
    let chi = ang_mhz(8.0);
    let kerr = -TWO_PI * 100e3;
    let eps = eps_over_kappa * kappa;
    match mechanism {
        Mechanism::Idc => ReadoutScenario::idc(chi, kerr, kappa, eps, 0.1),
        Mechanism::Npdc => {
            let mut s = ReadoutScenario::npdc(chi, kerr, kappa, eps);
            s.critical_photon_number = Some(477.0);
            s
        }
        Mechanism::Ideal => ReadoutScenario::ideal(chi, kappa, eps),
    }
}

fn main() {
    let target = 0.9999;
    let kappa = ang_mhz(16.0);

    println!("kappa*tau to reach fidelity {target}:");
    println!("eps/kappa  induced      parametric");
    for eps_over_kappa in [0.3, 0.5, 1.0, 2.0, 3.0] {
        let cell = |mech| match time_to_fidelity(&scenario(mech, eps_over_kappa), target, 0.0) {
            Ok(tau) => format!("{:<12.2}", tau * kappa),
            Err(ProtocolError::Unreachable { best_fidelity, .. }) => {
                format!("best {best_fidelity:.4}")
            }
            Err(ProtocolError::DriveTooStrong { .. }) => "over ceiling".into(),
            Err(e) => format!("{e}"),
        };
        println!(
            "{eps_over_kappa:<10} {} {}",
            cell(Mechanism::Idc),
            cell(Mechanism::Npdc)
        );
    }

    println!();
    println!("admissible drive windows for the same target:");
    for mech in [Mechanism::Idc, Mechanism::Npdc] {
        let b = drive_bounds(&scenario(mech, 1.0), target).unwrap();
        let ceiling = b
            .epsilon_max
            .map(|e| format!("{:.3}", e / kappa))
            .unwrap_or_else(|| "none".into());
        println!(
            "{:?}: eps_min/kappa = {:.3}, eps_max/kappa = {ceiling}",
            mech,
            b.epsilon_min / kappa
        );
    }
    println!(
        "The induced ceiling is the critical photon number of the hybridized \
         qubit; the parametric ceiling is the pump strength that would exceed \
         the SQUID's linear flux response."
    );
}
