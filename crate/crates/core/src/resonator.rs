//! Quarter-wave transmission-line resonator terminated by one or more dc
//! SQUIDs: flux-tuned frequency, flux sensitivity, self-Kerr nonlinearity,
//! critical photon number and flux/critical-current dephasing rates.
//!
//! Conventions: frequencies and rates are angular (rad/s); magnetic flux is
//! dimensionless in units of the flux quantum `PHI0`; inductances henries,
//! capacitances farads. SQUID Josephson energies are per junction and given as
//! angular frequencies (energy divided by hbar).

use crate::consts::{E_CHARGE, HBAR, PHI0, TWO_PI};
use crate::roots::bracketed_root;
use std::f64::consts::PI;

/// How the junction asymmetry enters the effective Josephson energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsymmetryForm {
    /// sqrt(cos^2 + d^2 sin^2): standard two-junction interference result.
    #[default]
    Squared,
    /// sqrt(cos^2 + d sin^2): linear-d variant kept for comparison runs.
    Linear,
}

/// One dc SQUID shorting the resonator end to ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquidSpec {
    /// Per-junction Josephson energy over hbar, rad/s. Two junctions give a
    /// zero-flux SQUID energy of twice this value.
    pub josephson_energy: f64,
    /// Single-junction capacitance, F.
    pub junction_capacitance: f64,
    /// Junction asymmetry d in [0, 1).
    pub asymmetry: f64,
    pub asymmetry_form: AsymmetryForm,
}

impl SquidSpec {
    pub fn symmetric(josephson_energy: f64) -> Self {
        SquidSpec {
            josephson_energy,
            junction_capacitance: 0.0,
            asymmetry: 0.0,
            asymmetry_form: AsymmetryForm::Squared,
        }
    }

    pub fn validate(&self) -> Result<(), ResonatorError> {
        if !(self.josephson_energy > 0.0) {
            return Err(ResonatorError::InvalidSpec(
                "josephson_energy must be positive".into(),
            ));
        }
        if self.junction_capacitance < 0.0 {
            return Err(ResonatorError::InvalidSpec(
                "junction_capacitance must be non-negative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.asymmetry) {
            return Err(ResonatorError::InvalidSpec(
                "asymmetry must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// SQUID-terminated quarter-wave resonator.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonatorSpec {
    /// Bare quarter-wave frequency of the unloaded line, rad/s.
    pub omega0: f64,
    /// Total line inductance, H.
    pub total_inductance: f64,
    /// Total line capacitance, F; consistent with omega0 = (pi/2)/sqrt(L_t C_t).
    pub total_capacitance: f64,
    /// Photon escape rate, rad/s.
    pub kappa: f64,
    pub squids: Vec<SquidSpec>,
}

/// Flux bias split into a static working point and a small deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FluxBias {
    /// Static bias, units of PHI0.
    pub static_part: f64,
    /// Deviation around the bias, units of PHI0; meant to stay linear.
    pub deviation: f64,
}

impl FluxBias {
    pub fn total(&self) -> f64 {
        self.static_part + self.deviation
    }

    /// True when the deviation is too large for the linear-response treatment.
    pub fn deviation_suspect(&self) -> bool {
        self.deviation.abs() > 1e-2
    }
}

/// 1/f-style noise amplitudes entering the dephasing rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasNoiseSpec {
    /// Flux noise amplitude A_1, units of PHI0.
    pub flux_amplitude: f64,
    /// Fractional critical-current noise amplitude A_2.
    pub current_fraction: f64,
    /// Infrared cutoff of the noise spectrum, rad/s (kept for completeness;
    /// the rate formulas use amplitudes only).
    pub infrared_cutoff: f64,
}

/// Frequency-solution method for the loaded resonator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrequencyMethod {
    /// Full boundary-condition root on the lowest branch.
    #[default]
    Transcendental,
    /// First-order perturbative result omega0 * (1 - L_s/L_t).
    Linear,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ResonatorError {
    #[error("SQUID bias sits at the degeneracy point (flux = {flux} PHI0): effective Josephson energy vanishes")]
    DegenerateBias { flux: f64 },
    #[error("frequency root search failed after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("expected {expected} flux value(s) for {expected} SQUID(s), got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid resonator spec: {0}")]
    InvalidSpec(String),
}

/// Per-SQUID sensitivities plus joint frequency and Kerr of a multi-SQUID
/// termination.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSquidSummary {
    /// Joint renormalized frequency omega0 * (1 - sum L_sj / L_t), rad/s.
    pub omega_r0: f64,
    /// Flux sensitivity of each SQUID at its own bias, rad/s per PHI0.
    pub sensitivities: Vec<f64>,
    /// Total self-Kerr, rad/s (sum of per-SQUID contributions).
    pub kerr_total: f64,
}

/// Dephasing rates from flux and critical-current noise, rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingRates {
    pub flux: f64,
    pub current: f64,
}

// Effective Josephson energies below this fraction of the zero-flux value are
// treated as the degeneracy point.
const DEGENERACY_FRACTION: f64 = 1e-9;

impl ResonatorSpec {
    /// Spec with the line capacitance derived from the quarter-wave relation.
    pub fn quarter_wave(
        omega0: f64,
        total_inductance: f64,
        kappa: f64,
        squids: Vec<SquidSpec>,
    ) -> Result<Self, ResonatorError> {
        let total_capacitance = PI * PI / (4.0 * omega0 * omega0 * total_inductance);
        let spec = ResonatorSpec {
            omega0,
            total_inductance,
            total_capacitance,
            kappa,
            squids,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ResonatorError> {
        if !(self.omega0 > 0.0) || !(self.total_inductance > 0.0) || self.kappa < 0.0 {
            return Err(ResonatorError::InvalidSpec(
                "omega0 and total_inductance must be positive, kappa non-negative".into(),
            ));
        }
        let expected = (PI / 2.0) / (self.total_inductance * self.total_capacitance).sqrt();
        if ((expected - self.omega0) / self.omega0).abs() > 1e-9 {
            return Err(ResonatorError::InvalidSpec(format!(
                "total_capacitance inconsistent with quarter-wave relation by {:.3e} relative",
                ((expected - self.omega0) / self.omega0).abs()
            )));
        }
        if self.squids.is_empty() {
            return Err(ResonatorError::InvalidSpec(
                "at least one SQUID is required".into(),
            ));
        }
        for s in &self.squids {
            s.validate()?;
        }
        Ok(())
    }

    /// Zero-point phase amplitude across the line at frequency `omega_r0`.
    pub fn zero_point_phase(&self, omega_r0: f64) -> f64 {
        (TWO_PI / PHI0) * (HBAR / (2.0 * omega_r0 * self.total_capacitance)).sqrt()
    }

    fn single_squid(&self) -> Result<&SquidSpec, ResonatorError> {
        if self.squids.len() != 1 {
            return Err(ResonatorError::LengthMismatch {
                expected: 1,
                got: self.squids.len(),
            });
        }
        Ok(&self.squids[0])
    }
}

/// Flux-dependent SQUID Josephson energy over hbar, rad/s.
pub fn effective_josephson_energy(squid: &SquidSpec, flux: f64) -> f64 {
    let c = (PI * flux).cos();
    let s = (PI * flux).sin();
    let d = squid.asymmetry;
    let modulation = match squid.asymmetry_form {
        AsymmetryForm::Squared => (c * c + d * d * s * s).sqrt(),
        AsymmetryForm::Linear => (c * c + d * s * s).max(0.0).sqrt(),
    };
    2.0 * squid.josephson_energy * modulation
}

/// Linearized SQUID inductance (Phi0/2pi)^2 / E_s, H.
pub fn squid_inductance(squid: &SquidSpec, flux: f64) -> Result<f64, ResonatorError> {
    let es = effective_josephson_energy(squid, flux);
    if es < DEGENERACY_FRACTION * 2.0 * squid.josephson_energy {
        return Err(ResonatorError::DegenerateBias { flux });
    }
    let phi_red = PHI0 / TWO_PI;
    Ok(phi_red * phi_red / (HBAR * es))
}

/// Loaded resonator frequency on the lowest branch, rad/s.
///
/// The transcendental method solves
/// `x tan x = L_t/L_s - (2 C_s/C_t) x^2` with `x = pi omega / (2 omega0)`;
/// the linear method returns `omega0 (1 - L_s/L_t)`.
pub fn solve_frequency(
    res: &ResonatorSpec,
    flux: f64,
    method: FrequencyMethod,
) -> Result<f64, ResonatorError> {
    let squid = res.single_squid()?;
    let ls = squid_inductance(squid, flux)?;
    solve_frequency_from_inductance(res, squid, ls, method)
}

fn solve_frequency_from_inductance(
    res: &ResonatorSpec,
    squid: &SquidSpec,
    ls: f64,
    method: FrequencyMethod,
) -> Result<f64, ResonatorError> {
    let ratio = ls / res.total_inductance;
    if ratio >= 0.5 {
        return Err(ResonatorError::InvalidSpec(format!(
            "L_s/L_t = {ratio:.3} outside the perturbative regime (< 0.5)"
        )));
    }
    match method {
        FrequencyMethod::Linear => Ok(res.omega0 * (1.0 - ratio)),
        FrequencyMethod::Transcendental => {
            let cap_ratio = 2.0 * squid.junction_capacitance / res.total_capacitance;
            let g = |omega: f64| {
                let x = PI * omega / (2.0 * res.omega0);
                x * x.tan() - 1.0 / ratio + cap_ratio * x * x
            };
            // Default bracket; the upper end creeps toward omega0 until the
            // diverging tangent dominates for very small L_s/L_t.
            let lo = 0.5 * res.omega0;
            let mut hi = 0.999 * res.omega0;
            let mut widen = 0;
            while g(hi) < 0.0 {
                widen += 1;
                if widen > 40 {
                    return Err(ResonatorError::NoConvergence { iterations: widen });
                }
                hi = res.omega0 * (1.0 - 0.1 * (res.omega0 - hi) / res.omega0);
            }
            bracketed_root(g, lo, hi, 1e-12)
                .map_err(|e| ResonatorError::NoConvergence {
                    iterations: e.iterations,
                })
        }
    }
}

/// Flux sensitivity d(omega_r)/d(flux) of the linearized frequency, rad/s per
/// PHI0. Negative on (0, 1/2) where the frequency falls with flux.
pub fn flux_sensitivity(res: &ResonatorSpec, flux: f64) -> Result<f64, ResonatorError> {
    let squid = res.single_squid()?;
    let ls = squid_inductance(squid, flux)?;
    Ok(sensitivity_from_inductance(res, squid, ls, flux))
}

fn sensitivity_from_inductance(
    res: &ResonatorSpec,
    squid: &SquidSpec,
    ls: f64,
    flux: f64,
) -> f64 {
    let c = (PI * flux).cos();
    let s = (PI * flux).sin();
    let dfrac = match squid.asymmetry_form {
        AsymmetryForm::Squared => squid.asymmetry * squid.asymmetry,
        AsymmetryForm::Linear => squid.asymmetry,
    };
    let u = c * c + dfrac * s * s;
    // d ln L_s / d flux = pi (1 - dfrac) sin(2 pi flux) / (2 u); reduces to
    // pi tan(pi flux) for a symmetric SQUID.
    let dln_ls = PI * (1.0 - dfrac) * (2.0 * PI * flux).sin() / (2.0 * u);
    -res.omega0 * (ls / res.total_inductance) * dln_ls
}

/// Self-Kerr coefficient of the loaded mode, rad/s (negative).
pub fn kerr_strength(res: &ResonatorSpec, flux: f64) -> Result<f64, ResonatorError> {
    let squid = res.single_squid()?;
    let ls = squid_inductance(squid, flux)?;
    Ok(kerr_from_inductance(res, ls))
}

fn kerr_from_inductance(res: &ResonatorSpec, ls: f64) -> f64 {
    let lt = res.total_inductance;
    let omega_r0 = res.omega0 * (1.0 - ls / lt);
    let participation = PI * ls / (2.0 * lt);
    -(PI * E_CHARGE * E_CHARGE * omega_r0 * omega_r0 * lt / 8.0)
        * participation.powi(3)
        / HBAR
}

/// Photon number at which the SQUID phase excursion reaches unity; the
/// dispersive model is trusted well below this. Returns `f64::INFINITY` in the
/// vanishing-participation limit.
pub fn critical_photon_number(res: &ResonatorSpec, flux: f64) -> Result<f64, ResonatorError> {
    let squid = res.single_squid()?;
    let ls = squid_inductance(squid, flux)?;
    let omega_r = res.omega0 * (1.0 - ls / res.total_inductance);
    let cosine = (PI * omega_r / (2.0 * res.omega0)).cos();
    if cosine <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let alpha_c = PHI0 * (2.0 * omega_r * res.total_capacitance / HBAR).sqrt()
        / (4.0 * PI * cosine);
    let n_c = alpha_c * alpha_c;
    Ok(if n_c.is_finite() { n_c } else { f64::INFINITY })
}

/// Pure-dephasing rates from flux noise and critical-current noise, rad/s.
///
/// The current channel differentiates the linearized frequency through the
/// per-junction Josephson energy (critical current and Josephson energy are
/// proportional), by centered finite difference.
pub fn dephasing_rates(
    res: &ResonatorSpec,
    flux: f64,
    noise: &BiasNoiseSpec,
) -> Result<DephasingRates, ResonatorError> {
    let squid = res.single_squid()?;
    let gamma_flux = noise.flux_amplitude * flux_sensitivity(res, flux)?.abs();

    let rel = 1e-6;
    let omega_at = |scale: f64| -> Result<f64, ResonatorError> {
        let mut s = *squid;
        s.josephson_energy *= scale;
        let ls = squid_inductance(&s, flux)?;
        solve_frequency_from_inductance(res, &s, ls, FrequencyMethod::Linear)
    };
    // |d omega_r / d I_c| * I_c = |d omega_r / d ln E_s0|
    let dw_dln = (omega_at(1.0 + rel)? - omega_at(1.0 - rel)?) / (2.0 * rel);
    let gamma_current = noise.current_fraction * dw_dln.abs();
    Ok(DephasingRates {
        flux: gamma_flux,
        current: gamma_current,
    })
}

/// Joint frequency, per-SQUID sensitivities and total Kerr for a resonator
/// terminated by several SQUIDs, one bias flux per SQUID.
pub fn multi_squid_summary(
    res: &ResonatorSpec,
    fluxes: &[f64],
) -> Result<MultiSquidSummary, ResonatorError> {
    if fluxes.len() != res.squids.len() {
        return Err(ResonatorError::LengthMismatch {
            expected: res.squids.len(),
            got: fluxes.len(),
        });
    }
    let mut ls_sum = 0.0;
    let mut sensitivities = Vec::with_capacity(fluxes.len());
    let mut kerr_total = 0.0;
    for (squid, &flux) in res.squids.iter().zip(fluxes) {
        let ls = squid_inductance(squid, flux)?;
        ls_sum += ls;
        sensitivities.push(sensitivity_from_inductance(res, squid, ls, flux));
        // Each SQUID contributes its single-SQUID Kerr, so n identical SQUIDs
        // give exactly n times the single value.
        kerr_total += kerr_from_inductance(res, ls);
    }
    let ratio = ls_sum / res.total_inductance;
    if ratio >= 0.5 {
        return Err(ResonatorError::InvalidSpec(format!(
            "sum of L_s/L_t = {ratio:.3} outside the perturbative regime (< 0.5)"
        )));
    }
    Ok(MultiSquidSummary {
        omega_r0: res.omega0 * (1.0 - ratio),
        sensitivities,
        kerr_total,
    })
}
