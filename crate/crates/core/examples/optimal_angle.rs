//! With a Kerr-shifted cavity the best local-oscillator angle is no longer
//! the naive quadrature: the parametric pointer states rotate with photon
//! number, and the optimal offset grows almost linearly with drive.

use fluxread::consts::{ang_mhz, TWO_PI};
use fluxread::protocol::optimize_homodyne_angle;
use fluxread::readout::ReadoutScenario;
use fluxread::roots::linear_fit;

fn main() {
    let kappa = ang_mhz(16.0);
    let chi = ang_mhz(8.0);
    let kerr = -TWO_PI * 100e3;
    let target = 0.9999;

    let mut drives = Vec::new();
    let mut shifts_deg = Vec::new();
    println!("eps/kappa  delta_phi_opt (deg)  kappa*tau at optimum");
    for i in 0..8 {
        let eps_over_kappa = 1.0 + i as f64;
        let mut sc = ReadoutScenario::npdc(chi, kerr, kappa, eps_over_kappa * kappa);
        sc.critical_photon_number = Some(477.0);
        let (dphi, tau) = optimize_homodyne_angle(&sc, target).unwrap();
        println!(
            "{eps_over_kappa:<10} {:<20.2} {:.2}",
            dphi.to_degrees(),
            tau * kappa
        );
        drives.push(eps_over_kappa);
        shifts_deg.push(dphi.to_degrees());
    }

    let (a, b, r2) = linear_fit(&shifts_deg, &drives);
    println!();
    println!(
        "linear law eps/kappa = a * delta_phi + b: a = {a:.3} per degree, \
         b = {b:.3}, R^2 = {r2:.4}"
    );
    println!(
        "Reading the fit backwards gives a calibration: measure the angle that \
         maximizes SNR and infer the intracavity drive actually reaching the \
         SQUID."
    );
}
