//! Tune a SQUID-terminated quarter-wave resonator across flux bias and watch
//! the trade-off appear: more flux sensitivity buys more Kerr and a smaller
//! critical photon number.

use fluxread::consts::{ang_ghz, ang_mhz, to_hz};
use fluxread::resonator::{
    critical_photon_number, dephasing_rates, flux_sensitivity, kerr_strength, solve_frequency,
    BiasNoiseSpec, FrequencyMethod, ResonatorSpec, SquidSpec,
};

fn main() {
    let res = ResonatorSpec::quarter_wave(
        ang_ghz(6.0),
        10e-9,
        ang_mhz(16.0),
        vec![SquidSpec::symmetric(ang_ghz(2500.0))],
    )
    .unwrap();

    println!("flux      omega_r/2pi   |R|/2pi          |K|/2pi       n_c");
    println!("(Phi_0)   (GHz)         (MHz/mPhi_0)     (kHz)");
    for i in 0..=9 {
        let flux = 0.054 * i as f64;
        let omega = solve_frequency(&res, flux, FrequencyMethod::Transcendental).unwrap();
        let r = flux_sensitivity(&res, flux).unwrap();
        let k = kerr_strength(&res, flux).unwrap();
        let nc = critical_photon_number(&res, flux).unwrap();
        println!(
            "{flux:<9.3} {:<13.4} {:<16.3} {:<13.2} {nc:<10.0}",
            to_hz(omega) / 1e9,
            to_hz(r).abs() * 1e-3 / 1e6,
            to_hz(k).abs() / 1e3,
        );
    }

    // The working point: steep enough to transduce qubit flux, still hundreds
    // of photons away from the nonlinear ceiling.
    let flux = 0.48;
    let noise = BiasNoiseSpec {
        flux_amplitude: 5e-6,
        current_fraction: 1e-6,
        infrared_cutoff: 1.0,
    };
    let rates = dephasing_rates(&res, flux, &noise).unwrap();
    println!();
    println!("operating point f = {flux}");
    println!(
        "  perturbative vs full frequency: {:.4} vs {:.4} GHz",
        to_hz(solve_frequency(&res, flux, FrequencyMethod::Linear).unwrap()) / 1e9,
        to_hz(solve_frequency(&res, flux, FrequencyMethod::Transcendental).unwrap()) / 1e9,
    );
    println!(
        "  flux dephasing {:.2e} rad/s, critical-current dephasing {:.2e} rad/s",
        rates.flux, rates.current
    );
}
