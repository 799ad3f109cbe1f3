//! Measurement planning on top of the semiclassical readout: how long to
//! integrate for a target fidelity, which drives are admissible, where the
//! homodyne angle should sit, and when a drive risks bistable latching.
//!
//! Everything here reuses one integrated trajectory per drive setting; the
//! homodyne record for any (tau, angle offset) is pure algebra on it, so the
//! searches never re-integrate.

use num_complex::Complex64;
use thiserror::Error;

use crate::readout::{
    fidelity_from_snr, homodyne_record, integrate_langevin, Mechanism, ReadoutError,
    ReadoutScenario, Trajectory,
};
use crate::roots::golden_section_min;

/// Longest integration horizon considered, in units of 1/kappa. A protocol
/// that cannot reach its fidelity inside this window is declared unreachable.
pub const KAPPA_TAU_MAX: f64 = 500.0;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(
        "fidelity {target} unreachable within kappa tau = {horizon_kappa_tau}; best achieved {best_fidelity}"
    )]
    Unreachable {
        target: f64,
        best_fidelity: f64,
        horizon_kappa_tau: f64,
    },
    #[error("drive {epsilon:.4e} exceeds the admissible limit {limit:.4e} for this mechanism")]
    DriveTooStrong { epsilon: f64, limit: f64 },
    #[error("critical photon number is required for this mechanism and was not set")]
    MissingCriticalNumber,
    #[error("invalid protocol request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Readout(#[from] ReadoutError),
}

/// Largest grid spacing the readout integrator accepts for this scenario.
fn grid_spacing(scenario: &ReadoutScenario) -> f64 {
    let n_est = {
        let r = 2.0 * scenario.drive_amplitude / scenario.kappa;
        (r * r).max(1.0)
    };
    let fastest = scenario
        .kappa
        .max(scenario.chi_z.abs())
        .max(scenario.kerr.abs() * n_est);
    0.01 / fastest
}

/// Hard ceiling on the drive for a mechanism, when one exists.
///
/// The ionization channel caps the photon number at half the critical value;
/// with the linear steady state on the pulled branch that bounds the drive at
/// `kappa / (2 sqrt(2) lambda)`. The parametric mechanism instead runs away
/// once the Kerr drags the hot branch through resonance, which happens near
/// the resonant steady drive `kappa sqrt(n_c) / 2`. The ideal cavity has no
/// ceiling.
pub fn drive_ceiling(scenario: &ReadoutScenario) -> Result<Option<f64>, ProtocolError> {
    match scenario.mechanism {
        Mechanism::Ideal => Ok(None),
        Mechanism::Idc => {
            if scenario.lambda <= 0.0 {
                return Err(ProtocolError::Invalid(
                    "ionization ceiling needs lambda > 0".into(),
                ));
            }
            Ok(Some(
                scenario.kappa / (2.0 * std::f64::consts::SQRT_2 * scenario.lambda),
            ))
        }
        Mechanism::Npdc => {
            let n_c = scenario
                .critical_photon_number
                .ok_or(ProtocolError::MissingCriticalNumber)?;
            Ok(Some(scenario.kappa * n_c.sqrt() / 2.0))
        }
    }
}

fn check_ceiling(scenario: &ReadoutScenario) -> Result<(), ProtocolError> {
    if let Some(limit) = drive_ceiling(scenario)? {
        if scenario.drive_amplitude > limit {
            return Err(ProtocolError::DriveTooStrong {
                epsilon: scenario.drive_amplitude,
                limit,
            });
        }
    }
    Ok(())
}

/// First time the measurement fidelity reaches `target` on a trajectory, or
/// the best fidelity seen when it never does.
fn crossing_on_trajectory(
    scenario: &ReadoutScenario,
    traj: &Trajectory,
    target: f64,
    delta_phi: f64,
) -> Result<Result<f64, f64>, ProtocolError> {
    let kappa = scenario.kappa;
    let horizon = traj.horizon();
    // Discrimination quality does not care which branch the record labels
    // high, so the crossing works with the separation magnitude; the signed
    // record stays available for quadrature bookkeeping.
    let fidelity_at = |tau: f64| -> Result<f64, ProtocolError> {
        Ok(fidelity_from_snr(
            homodyne_record(scenario, traj, tau, delta_phi)?.snr.abs(),
        ))
    };

    // Coarse scan in steps of 0.25/kappa, then bisect inside the first
    // bracket. Fidelity can peak and fall again, so the scan keeps the best
    // value for the failure report.
    let coarse = 0.25 / kappa;
    let mut best = 0.0_f64;
    let mut prev_tau = coarse.min(horizon) * 1e-6;
    let mut prev_f = fidelity_at(prev_tau)?;
    best = best.max(prev_f);
    if prev_f >= target {
        return Ok(Ok(prev_tau));
    }
    let steps = (horizon / coarse).floor() as usize;
    for i in 1..=steps {
        let tau = (i as f64 * coarse).min(horizon);
        let f = fidelity_at(tau)?;
        best = best.max(f);
        if f >= target {
            // Bisect the bracket down to a millikappa of timing.
            let (mut lo, mut hi) = (prev_tau, tau);
            let tol = 1e-3 / kappa;
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if fidelity_at(mid)? >= target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Ok(0.5 * (lo + hi)));
        }
        prev_tau = tau;
        prev_f = f;
    }
    let _ = prev_f;
    Ok(Err(best))
}

fn trajectory_to(scenario: &ReadoutScenario, kappa_tau: f64) -> Result<Trajectory, ProtocolError> {
    let dt = grid_spacing(scenario);
    Ok(integrate_langevin(scenario, kappa_tau / scenario.kappa, dt)?)
}

/// Shortest integration time that reaches `target` fidelity, with the
/// local-oscillator angle offset by `delta_phi` from the scenario's setting.
///
/// The horizon grows in stages up to [`KAPPA_TAU_MAX`]; beyond that the
/// request fails with the best fidelity that was achievable.
pub fn time_to_fidelity(
    scenario: &ReadoutScenario,
    target: f64,
    delta_phi: f64,
) -> Result<f64, ProtocolError> {
    if !(0.5 < target && target < 1.0) {
        return Err(ProtocolError::Invalid(format!(
            "target fidelity must lie in (0.5, 1), got {target}"
        )));
    }
    check_ceiling(scenario)?;
    let mut best = 0.0_f64;
    for horizon in [60.0, 180.0, KAPPA_TAU_MAX] {
        let traj = trajectory_to(scenario, horizon)?;
        match crossing_on_trajectory(scenario, &traj, target, delta_phi)? {
            Ok(tau) => return Ok(tau),
            Err(b) => best = best.max(b),
        }
    }
    Err(ProtocolError::Unreachable {
        target,
        best_fidelity: best,
        horizon_kappa_tau: KAPPA_TAU_MAX,
    })
}

/// Admissible drive window for a target fidelity.
#[derive(Debug, Clone, Copy)]
pub struct DriveBounds {
    /// Weakest drive that still reaches the target within the horizon.
    pub epsilon_min: f64,
    /// Mechanism ceiling; `None` when the mechanism imposes none.
    pub epsilon_max: Option<f64>,
}

/// Bracket-and-bisect the weakest workable drive, and report the mechanism
/// ceiling alongside. The scenario's own drive amplitude is ignored.
pub fn drive_bounds(
    scenario: &ReadoutScenario,
    target: f64,
) -> Result<DriveBounds, ProtocolError> {
    let epsilon_max = drive_ceiling(scenario)?;
    let reachable = |eps: f64| -> Result<bool, ProtocolError> {
        let mut s = scenario.clone();
        s.drive_amplitude = eps;
        match time_to_fidelity(&s, target, 0.0) {
            Ok(_) => Ok(true),
            Err(ProtocolError::Unreachable { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    };

    // Grow the upper probe until it works, honoring the ceiling.
    let mut hi = scenario.kappa / 8.0;
    loop {
        if let Some(cap) = epsilon_max {
            if hi > cap {
                hi = cap;
            }
        }
        if reachable(hi)? {
            break;
        }
        if let Some(cap) = epsilon_max {
            if hi >= cap {
                return Err(ProtocolError::Unreachable {
                    target,
                    best_fidelity: f64::NAN,
                    horizon_kappa_tau: KAPPA_TAU_MAX,
                });
            }
        }
        hi *= 2.0;
        if hi > 1e3 * scenario.kappa {
            return Err(ProtocolError::Invalid(
                "no workable drive below 1000 kappa".into(),
            ));
        }
    }
    let mut lo = hi / 2.0;
    while reachable(lo)? {
        hi = lo;
        lo /= 2.0;
        if lo < 1e-6 * scenario.kappa {
            lo = 0.0;
            break;
        }
    }
    // lo unreachable (or zero), hi reachable.
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if reachable(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(DriveBounds {
        epsilon_min: hi,
        epsilon_max,
    })
}

/// Local-oscillator offset in `[-pi/4, pi/4]` that minimizes the time to the
/// target fidelity, together with that minimal time. One trajectory serves
/// the whole search; offsets that fail inside the horizon rank as infinite.
pub fn optimize_homodyne_angle(
    scenario: &ReadoutScenario,
    target: f64,
) -> Result<(f64, f64), ProtocolError> {
    check_ceiling(scenario)?;
    // Size the horizon from the unshifted protocol, with headroom for the
    // early golden-section probes that land on worse angles.
    let base = time_to_fidelity(scenario, target, 0.0)?;
    let horizon = (4.0 * base * scenario.kappa).clamp(20.0, KAPPA_TAU_MAX);
    let traj = trajectory_to(scenario, horizon)?;

    let cost = |delta_phi: f64| -> f64 {
        match crossing_on_trajectory(scenario, &traj, target, delta_phi) {
            Ok(Ok(tau)) => tau,
            _ => f64::INFINITY,
        }
    };
    let quarter = std::f64::consts::FRAC_PI_4;
    let (dphi, tau) = golden_section_min(cost, -quarter, quarter, 40);
    if !tau.is_finite() {
        return Err(ProtocolError::Unreachable {
            target,
            best_fidelity: f64::NAN,
            horizon_kappa_tau: horizon,
        });
    }
    Ok((dphi, tau.min(base)))
}

/// One joint dispersive configuration of several qubits on a shared line.
#[derive(Debug, Clone)]
pub struct JointPointer {
    /// Qubit projections, +1 or -1 per qubit.
    pub sigma_z: Vec<i8>,
    /// Total dispersive shift `sum_i chi_i s_i`.
    pub dispersive_shift: f64,
    /// Steady-state rotation angle `atan(2 shift / kappa)`.
    pub rotation_angle: f64,
    /// Steady cavity amplitude under the given drive.
    pub steady_amplitude: Complex64,
}

/// Enumerate the pointer states of multiple dispersively coupled qubits.
/// Configurations come out in binary order with +1 first for each qubit.
pub fn joint_pointer_states(
    chis: &[f64],
    kappa: f64,
    drive_amplitude: f64,
    drive_phase: f64,
) -> Result<Vec<JointPointer>, ProtocolError> {
    if chis.is_empty() || chis.len() > 16 {
        return Err(ProtocolError::Invalid(
            "need between 1 and 16 qubit couplings".into(),
        ));
    }
    if !(kappa > 0.0) {
        return Err(ProtocolError::Invalid("kappa must be positive".into()));
    }
    let drive = Complex64::from_polar(drive_amplitude, drive_phase);
    let n = chis.len();
    let mut out = Vec::with_capacity(1 << n);
    for mask in 0..(1_u32 << n) {
        let sigma_z: Vec<i8> = (0..n)
            .map(|i| if mask >> i & 1 == 0 { 1 } else { -1 })
            .collect();
        let shift: f64 = chis
            .iter()
            .zip(&sigma_z)
            .map(|(chi, &s)| chi * s as f64)
            .sum();
        let steady = drive / Complex64::new(kappa / 2.0, shift);
        out.push(JointPointer {
            sigma_z,
            dispersive_shift: shift,
            rotation_angle: (2.0 * shift / kappa).atan(),
            steady_amplitude: steady,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriveRegime {
    /// Single steady state for every drive strength.
    Safe,
    /// Detuning deep enough for the Kerr to fold the steady-state curve.
    Bistable,
}

#[derive(Debug, Clone, Copy)]
pub struct BistabilityReport {
    pub regime: DriveRegime,
    /// Positive steady photon numbers at the scenario's own drive.
    pub steady_roots: usize,
    /// Effective detuning of the vulnerable branch over kappa, signed so that
    /// the Kerr pulls it toward resonance; folding needs < -sqrt(3)/2.
    pub normalized_detuning: f64,
}

/// Classify the steady-state structure of the Kerr cavity branch that the
/// nonlinearity drags toward resonance.
///
/// The steady photon number obeys
/// `n ((Delta + 2 K n)^2 + kappa^2/4) = epsilon^2`; the curve folds (three
/// roots over a drive window) exactly when `|Delta| > sqrt(3) kappa / 2` with
/// the Kerr shift opposing the detuning.
pub fn bistability_check(scenario: &ReadoutScenario) -> Result<BistabilityReport, ProtocolError> {
    scenario.validate()?;
    let kappa = scenario.kappa;
    let kerr = scenario.kerr;
    // The vulnerable branch is the one whose detuning the Kerr compensates:
    // sign(Delta) = -sign(K). With the dispersive shift +-chi_z both branches
    // exist, so the magnitude is chi_z either way.
    let delta = if kerr == 0.0 {
        scenario.chi_z
    } else {
        -kerr.signum() * scenario.chi_z.abs()
    };
    let normalized = -delta.abs() / kappa * if kerr == 0.0 { 0.0 } else { 1.0 };

    let regime = if kerr != 0.0 && delta.abs() > 3.0_f64.sqrt() * kappa / 2.0 {
        DriveRegime::Bistable
    } else {
        DriveRegime::Safe
    };

    let eps2 = scenario.drive_amplitude * scenario.drive_amplitude;
    let roots = if kerr == 0.0 {
        1
    } else {
        // 4K^2 n^3 + 4 Delta K n^2 + (Delta^2 + kappa^2/4) n - eps^2 = 0
        let a = 4.0 * kerr * kerr;
        let b = 4.0 * delta * kerr;
        let c = delta * delta + kappa * kappa / 4.0;
        let d = -eps2;
        cubic_real_roots(a, b, c, d)
            .into_iter()
            .filter(|&n| n > 0.0)
            .count()
    };

    Ok(BistabilityReport {
        regime,
        steady_roots: roots,
        normalized_detuning: normalized,
    })
}

/// Real roots of `a x^3 + b x^2 + c x + d`, `a != 0`, via the depressed cubic.
fn cubic_real_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    debug_assert!(a != 0.0);
    let (b, c, d) = (b / a, c / a, d / a);
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let disc = -4.0 * p * p * p - 27.0 * q * q;
    if disc > 0.0 {
        // Three distinct real roots.
        let m = 2.0 * (-p / 3.0).sqrt();
        let theta = (3.0 * q / (p * m)).acos() / 3.0;
        (0..3)
            .map(|k| {
                m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift
            })
            .collect()
    } else {
        // One real root by Cardano.
        let half_q = q / 2.0;
        let inner = (half_q * half_q + p * p * p / 27.0).sqrt();
        let u = (-half_q + inner).cbrt();
        let v = (-half_q - inner).cbrt();
        vec![u + v + shift]
    }
}
