//! Physical constants (SI) and frequency-unit helpers.
//!
//! All rates and frequencies inside the crate are angular (rad/s). Energies are
//! evaluated in joules and divided by `HBAR` at the boundary where an angular
//! frequency is needed.

/// Reduced Planck constant, J*s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J*s.
pub const PLANCK_H: f64 = 6.626_070_15e-34;
/// Elementary charge, C.
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Magnetic flux quantum h/(2e), Wb.
pub const PHI0: f64 = 2.067_833_848e-15;

pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Angular frequency from a value in ordinary Hz.
pub fn ang_hz(f: f64) -> f64 {
    TWO_PI * f
}

/// Angular frequency from MHz.
pub fn ang_mhz(f: f64) -> f64 {
    TWO_PI * f * 1e6
}

/// Angular frequency from GHz.
pub fn ang_ghz(f: f64) -> f64 {
    TWO_PI * f * 1e9
}

/// Ordinary-frequency value (Hz) of an angular rate.
pub fn to_hz(omega: f64) -> f64 {
    omega / TWO_PI
}
