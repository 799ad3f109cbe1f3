//! Dispersive readout of a flux qubit through a driven, weakly nonlinear cavity.
//!
//! Three mechanisms are modelled. `Ideal` is the linear dispersive cavity with
//! qubit-state-dependent pull `±chi_z` and admits closed forms for the field,
//! the photon number, the homodyne signal separation, and the SNR. `Idc` adds a
//! qubit-conditioned Kerr term and Purcell decay of the excited qubit state,
//! both inherited from the transverse coupling of strength `lambda`. `Npdc`
//! adds a qubit-independent Kerr term and no Purcell channel.
//!
//! Semiclassics throughout: the field is a coherent amplitude per qubit branch,
//! `<N>` closes as `|alpha|^2` (times the qubit projection for `Idc`), and the
//! homodyne noise is the vacuum value. Quantum corrections live elsewhere.

use num_complex::Complex64;
use statrs::function::erf::{erf, erf_inv};
use thiserror::Error;

use crate::ode::Rk45;

/// How the cavity frequency is tied to the qubit state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// Linear dispersive cavity, pull `±chi_z`, no Kerr, no Purcell.
    Ideal,
    /// Induced dispersive coupling: qubit-conditioned Kerr, Purcell decay.
    Idc,
    /// Non-perturbative dispersive coupling: plain Kerr, no Purcell channel.
    Npdc,
}

/// Statistics of the field entering the measurement port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputNoise {
    Vacuum,
    /// Declared for completeness; the noise model here is vacuum-only.
    SqueezedVacuum,
}

#[derive(Debug, Error)]
pub enum ReadoutError {
    #[error("invalid readout scenario: {0}")]
    InvalidScenario(String),
    #[error("only vacuum input noise is supported")]
    UnsupportedNoise,
    #[error("output spacing {dt:.3e} s exceeds the resolvable limit {limit:.3e} s")]
    StepSizeTooLarge { dt: f64, limit: f64 },
    #[error("photon number {photons:.3e} exceeded ten times the critical number {critical:.3e}")]
    Overflow { photons: f64, critical: f64 },
    #[error("requested time {tau:.3e} s lies outside the integrated horizon {t_max:.3e} s")]
    OutsideHorizon { tau: f64, t_max: f64 },
}

/// One readout configuration. Angular frequencies in rad/s, angles in radians.
///
/// `drive_phase` is the phase of the coherent drive, `homodyne_angle` the local
/// oscillator phase; only their difference matters for the signal. The maximal
/// separation sits at `drive_phase - homodyne_angle = pi/2`, which is what the
/// constructors pick.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReadoutScenario {
    pub mechanism: Mechanism,
    /// Dispersive pull per qubit state (rad/s).
    pub chi_z: f64,
    /// Self-Kerr coefficient (rad/s); negative for the SQUID-loaded cavity.
    pub kerr: f64,
    /// Photon escape rate (rad/s).
    pub kappa: f64,
    /// Coherent drive amplitude (rad/s).
    pub drive_amplitude: f64,
    pub drive_phase: f64,
    pub homodyne_angle: f64,
    /// Transverse-coupling ratio g_x/Delta; sets the Purcell rate and the
    /// critical photon number for `Idc`. Zero otherwise.
    pub lambda: f64,
    pub purcell_enabled: bool,
    /// Prepared qubit projection, +1 or -1.
    pub sigma_z_initial: f64,
    /// Photon ceiling; integration aborts above ten times this value.
    /// Defaults to `1/(4 lambda^2)` for `Idc`, unbounded otherwise.
    pub critical_photon_number: Option<f64>,
    pub input_noise: InputNoise,
}

impl ReadoutScenario {
    pub fn ideal(chi_z: f64, kappa: f64, drive_amplitude: f64) -> Self {
        ReadoutScenario {
            mechanism: Mechanism::Ideal,
            chi_z,
            kerr: 0.0,
            kappa,
            drive_amplitude,
            drive_phase: std::f64::consts::FRAC_PI_2,
            homodyne_angle: 0.0,
            lambda: 0.0,
            purcell_enabled: false,
            sigma_z_initial: 1.0,
            critical_photon_number: None,
            input_noise: InputNoise::Vacuum,
        }
    }

    pub fn idc(chi_z: f64, kerr: f64, kappa: f64, drive_amplitude: f64, lambda: f64) -> Self {
        ReadoutScenario {
            mechanism: Mechanism::Idc,
            kerr,
            lambda,
            purcell_enabled: true,
            critical_photon_number: None,
            ..Self::ideal(chi_z, kappa, drive_amplitude)
        }
    }

    pub fn npdc(chi_z: f64, kerr: f64, kappa: f64, drive_amplitude: f64) -> Self {
        ReadoutScenario {
            mechanism: Mechanism::Npdc,
            kerr,
            ..Self::ideal(chi_z, kappa, drive_amplitude)
        }
    }

    pub fn validate(&self) -> Result<(), ReadoutError> {
        if let InputNoise::SqueezedVacuum = self.input_noise {
            return Err(ReadoutError::UnsupportedNoise);
        }
        let finite = [
            self.chi_z,
            self.kerr,
            self.kappa,
            self.drive_amplitude,
            self.drive_phase,
            self.homodyne_angle,
            self.lambda,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(ReadoutError::InvalidScenario(
                "non-finite parameter".into(),
            ));
        }
        if self.kappa <= 0.0 {
            return Err(ReadoutError::InvalidScenario(format!(
                "kappa must be positive, got {:e}",
                self.kappa
            )));
        }
        if self.drive_amplitude < 0.0 {
            return Err(ReadoutError::InvalidScenario(
                "drive amplitude must be non-negative".into(),
            ));
        }
        if self.sigma_z_initial != 1.0 && self.sigma_z_initial != -1.0 {
            return Err(ReadoutError::InvalidScenario(format!(
                "sigma_z_initial must be +1 or -1, got {}",
                self.sigma_z_initial
            )));
        }
        if let Some(nc) = self.critical_photon_number {
            if !(nc > 0.0) {
                return Err(ReadoutError::InvalidScenario(
                    "critical photon number must be positive".into(),
                ));
            }
        }
        match self.mechanism {
            Mechanism::Ideal => {
                if self.kerr != 0.0 {
                    return Err(ReadoutError::InvalidScenario(
                        "ideal mechanism has no Kerr term".into(),
                    ));
                }
                if self.purcell_enabled {
                    return Err(ReadoutError::InvalidScenario(
                        "ideal mechanism has no Purcell channel".into(),
                    ));
                }
            }
            Mechanism::Idc => {
                // The dispersive expansion behind IDC needs a small coupling ratio.
                if !(self.lambda > 0.0 && self.lambda <= 0.3) {
                    return Err(ReadoutError::InvalidScenario(format!(
                        "idc requires lambda in (0, 0.3], got {}",
                        self.lambda
                    )));
                }
            }
            Mechanism::Npdc => {
                if self.purcell_enabled {
                    return Err(ReadoutError::InvalidScenario(
                        "npdc has no Purcell channel".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Pointer-state rotation angle `theta_q = atan(2 chi_z / kappa)`.
    pub fn rotation_angle(&self) -> f64 {
        (2.0 * self.chi_z / self.kappa).atan()
    }

    /// Purcell rate of the excited qubit state; zero unless enabled on `Idc`.
    pub fn purcell_rate(&self) -> f64 {
        if self.purcell_enabled && self.mechanism == Mechanism::Idc {
            purcell_rate(self.lambda, self.kappa)
        } else {
            0.0
        }
    }

    /// Photon ceiling used by the overflow guard, if any.
    pub fn effective_critical_number(&self) -> Option<f64> {
        self.critical_photon_number.or(match self.mechanism {
            Mechanism::Idc => Some(1.0 / (4.0 * self.lambda * self.lambda)),
            _ => None,
        })
    }

    /// Long-time photon number of the linear cavity, `(2 eps/kappa)^2 cos^2 theta_q`.
    pub fn steady_photons_linear(&self) -> f64 {
        let r = 2.0 * self.drive_amplitude / self.kappa;
        let c = self.rotation_angle().cos();
        r * r * c * c
    }
}

/// Rate at which cavity decay leaks through the residual transverse coupling.
pub fn purcell_rate(lambda: f64, kappa: f64) -> f64 {
    lambda * lambda * kappa
}

/// Dispersive coupling obtained by threading a qubit's circulating current
/// through the cavity SQUID: `chi_z = R * M * I / Phi_0`. `flux_sensitivity`
/// is in rad/s per flux quantum, `mutual_inductance` in henry, `current` in
/// ampere.
pub fn npdc_coupling(flux_sensitivity: f64, mutual_inductance: f64, current: f64) -> f64 {
    flux_sensitivity * mutual_inductance * current / crate::consts::PHI0
}

/// Cavity amplitude of the linear mechanism for a fixed qubit projection,
/// starting from vacuum:
/// `alpha(t) = eps e^{i theta_d} / (i chi_z s + kappa/2) * (1 - e^{-(i chi_z s + kappa/2) t})`.
pub fn ideal_cavity_amplitude(scenario: &ReadoutScenario, sigma_z: f64, t: f64) -> Complex64 {
    let denom = Complex64::new(scenario.kappa / 2.0, scenario.chi_z * sigma_z);
    let drive = Complex64::from_polar(scenario.drive_amplitude, scenario.drive_phase);
    drive / denom * (Complex64::new(1.0, 0.0) - (-denom * t).exp())
}

/// Photon number of the linear mechanism, identical to
/// `|ideal_cavity_amplitude|^2` for either qubit projection:
/// `n(t) = (2 eps/kappa)^2 cos^2 theta_q (1 + e^{-kappa t} - 2 cos(chi_z t) e^{-kappa t/2})`.
pub fn intracavity_photons(scenario: &ReadoutScenario, t: f64) -> f64 {
    let r = 2.0 * scenario.drive_amplitude / scenario.kappa;
    let c = scenario.rotation_angle().cos();
    let kt = scenario.kappa * t;
    r * r * c * c * (1.0 + (-kt).exp() - 2.0 * (scenario.chi_z * t).cos() * (-kt / 2.0).exp())
}

/// Homodyne signal separation of the linear mechanism after integrating for
/// `tau`, for the scenario's drive and local-oscillator phases:
/// `M_s = 4 eps sin(2 theta_q) sin(theta_d - phi_h)
///        [tau - (4 cos^2 theta_q / kappa)(1 - sin(chi_z tau + 2 theta_q)/sin(2 theta_q) e^{-kappa tau/2})]`.
pub fn separation_signal(scenario: &ReadoutScenario, tau: f64) -> f64 {
    let theta = scenario.rotation_angle();
    let s2 = (2.0 * theta).sin();
    if s2 == 0.0 {
        // No pull, no separation.
        return 0.0;
    }
    let c = theta.cos();
    let transient = 4.0 * c * c / scenario.kappa
        * (1.0
            - (scenario.chi_z * tau + 2.0 * theta).sin() / s2
                * (-scenario.kappa * tau / 2.0).exp());
    4.0 * scenario.drive_amplitude
        * s2
        * (scenario.drive_phase - scenario.homodyne_angle).sin()
        * (tau - transient)
}

/// Vacuum homodyne noise accumulated over `tau`.
pub fn measurement_noise(kappa: f64, tau: f64) -> f64 {
    (2.0 * kappa * tau).sqrt()
}

/// Single-shot assignment fidelity for a Gaussian record of SNR `r`.
pub fn fidelity_from_snr(r: f64) -> f64 {
    0.5 * (1.0 + erf(r / 2.0))
}

/// SNR needed for a given assignment fidelity; inverse of `fidelity_from_snr`.
pub fn required_snr(fidelity: f64) -> f64 {
    assert!(
        fidelity > 0.5 && fidelity < 1.0,
        "fidelity must lie in (0.5, 1)"
    );
    2.0 * erf_inv(2.0 * fidelity - 1.0)
}

/// Outcome of integrating the homodyne record for `tau`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MeasurementRecord {
    pub tau: f64,
    pub signal_separation: f64,
    pub noise: f64,
    pub snr: f64,
    pub fidelity: f64,
}

/// Bundle a separation signal with the vacuum noise at time `tau`.
pub fn noise_and_snr(scenario: &ReadoutScenario, tau: f64, signal: f64) -> MeasurementRecord {
    let noise = measurement_noise(scenario.kappa, tau);
    let snr = if noise > 0.0 { signal / noise } else { 0.0 };
    MeasurementRecord {
        tau,
        signal_separation: signal,
        noise,
        snr,
        fidelity: fidelity_from_snr(snr),
    }
}

/// Separation signal, noise, SNR, and fidelity of the linear mechanism.
pub fn ideal_record(scenario: &ReadoutScenario, tau: f64) -> MeasurementRecord {
    noise_and_snr(scenario, tau, separation_signal(scenario, tau))
}

/// Effective cavity detunings for the two qubit branches at the given photon
/// numbers. For `Idc` the Kerr back-action is qubit-conditioned and shrinks
/// both pulls symmetrically toward zero; for `Npdc` it shifts both pulls the
/// same way, so their magnitudes split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityPull {
    pub ground: f64,
    pub excited: f64,
}

pub fn cavity_pull(scenario: &ReadoutScenario, n_ground: f64, n_excited: f64) -> CavityPull {
    match scenario.mechanism {
        Mechanism::Ideal => CavityPull {
            ground: -scenario.chi_z,
            excited: scenario.chi_z,
        },
        Mechanism::Idc => {
            let nc = scenario
                .effective_critical_number()
                .expect("idc always carries a critical number");
            CavityPull {
                ground: -scenario.chi_z * (1.0 - n_ground / (2.0 * nc)),
                excited: scenario.chi_z * (1.0 - n_excited / (2.0 * nc)),
            }
        }
        Mechanism::Npdc => CavityPull {
            ground: -scenario.chi_z + 2.0 * scenario.kerr * n_ground,
            excited: scenario.chi_z + 2.0 * scenario.kerr * n_excited,
        },
    }
}

/// Semiclassical field history for both qubit preparations on a shared grid.
///
/// `int_alpha_*` carries the running integral of the amplitude, so a homodyne
/// record for any integration time and local-oscillator angle is pure algebra
/// on the stored rows; no re-integration is ever needed.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub time_grid: Vec<f64>,
    pub alpha_e: Vec<Complex64>,
    pub alpha_g: Vec<Complex64>,
    pub int_alpha_e: Vec<Complex64>,
    pub int_alpha_g: Vec<Complex64>,
    /// Qubit projection of the excited preparation; decays under Purcell.
    pub sigma_z_mean: Vec<f64>,
    pub photon_number_e: Vec<f64>,
    pub photon_number_g: Vec<f64>,
}

impl Trajectory {
    pub fn horizon(&self) -> f64 {
        *self.time_grid.last().unwrap()
    }

    /// Linear interpolation of a stored complex row at time `tau`.
    fn sample(&self, row: &[Complex64], tau: f64) -> Complex64 {
        let step = self.time_grid[1] - self.time_grid[0];
        let x = tau / step;
        let k = (x.floor() as usize).min(self.time_grid.len() - 2);
        let frac = x - k as f64;
        row[k] + (row[k + 1] - row[k]) * frac
    }
}

// sigma_z(t) for a branch prepared at s0, with Purcell rate gp.
fn branch_sigma_z(s0: f64, gp: f64, t: f64) -> f64 {
    if gp == 0.0 {
        s0
    } else {
        (1.0 + s0) * (-gp * t).exp() - 1.0
    }
}

/// Integrate the semiclassical Langevin mean-field equation
/// `d alpha/dt = -i (chi_z s + 2 K <N>) alpha - kappa/2 alpha + eps e^{i theta_d}`
/// from vacuum for both qubit preparations, with `<N> = |alpha|^2 s` under
/// `Idc` and `<N> = |alpha|^2` under `Npdc`, and `s(t)` following the Purcell
/// decay when enabled. Output lands on a uniform grid of spacing at most `dt`.
pub fn integrate_langevin(
    scenario: &ReadoutScenario,
    t_max: f64,
    dt: f64,
) -> Result<Trajectory, ReadoutError> {
    scenario.validate()?;
    if !(t_max > 0.0 && dt > 0.0) {
        return Err(ReadoutError::InvalidScenario(
            "horizon and grid spacing must be positive".into(),
        ));
    }
    // The grid must resolve every rate in the problem, including the Kerr
    // shift at the largest plausible photon number.
    let n_est = {
        let r = 2.0 * scenario.drive_amplitude / scenario.kappa;
        (r * r).max(1.0)
    };
    let fastest = scenario
        .kappa
        .max(scenario.chi_z.abs())
        .max(scenario.kerr.abs() * n_est);
    let limit = 0.01 / fastest;
    if dt > limit * (1.0 + 1e-12) {
        return Err(ReadoutError::StepSizeTooLarge { dt, limit });
    }

    let n_steps = (t_max / dt).ceil().max(1.0) as usize;
    let step = t_max / n_steps as f64;
    let grid: Vec<f64> = (0..=n_steps).map(|i| i as f64 * step).collect();

    let gp = scenario.purcell_rate();
    let chi = scenario.chi_z;
    let kerr = scenario.kerr;
    let kappa = scenario.kappa;
    let idc = scenario.mechanism == Mechanism::Idc;
    let drive = Complex64::from_polar(scenario.drive_amplitude, scenario.drive_phase);

    // State layout: [re ae, im ae, re Ie, im Ie, re ag, im ag, re Ig, im Ig].
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        for (branch, s0) in [(0usize, 1.0), (1usize, -1.0)] {
            let o = 4 * branch;
            let a = Complex64::new(y[o], y[o + 1]);
            let s = branch_sigma_z(s0, gp, t);
            let n = a.norm_sqr();
            let n_eff = if idc { n * s } else { n };
            let pull = chi * s + 2.0 * kerr * n_eff;
            let da = Complex64::new(0.0, -pull) * a - a * (kappa / 2.0) + drive;
            dy[o] = da.re;
            dy[o + 1] = da.im;
            dy[o + 2] = a.re;
            dy[o + 3] = a.im;
        }
    };

    let solver = Rk45 {
        rtol: 1e-12,
        atol: 1e-14,
    };
    let rows = solver
        .integrate_grid(rhs, &[0.0; 8], &grid)
        .map_err(|f| ReadoutError::StepSizeTooLarge {
            dt: f.step,
            limit: f.step,
        })?;

    let mut traj = Trajectory {
        time_grid: grid,
        alpha_e: Vec::with_capacity(rows.len()),
        alpha_g: Vec::with_capacity(rows.len()),
        int_alpha_e: Vec::with_capacity(rows.len()),
        int_alpha_g: Vec::with_capacity(rows.len()),
        sigma_z_mean: Vec::with_capacity(rows.len()),
        photon_number_e: Vec::with_capacity(rows.len()),
        photon_number_g: Vec::with_capacity(rows.len()),
    };
    for (i, y) in rows.iter().enumerate() {
        let ae = Complex64::new(y[0], y[1]);
        let ag = Complex64::new(y[4], y[5]);
        traj.alpha_e.push(ae);
        traj.alpha_g.push(ag);
        traj.int_alpha_e.push(Complex64::new(y[2], y[3]));
        traj.int_alpha_g.push(Complex64::new(y[6], y[7]));
        traj.sigma_z_mean
            .push(branch_sigma_z(1.0, gp, traj.time_grid[i]));
        traj.photon_number_e.push(ae.norm_sqr());
        traj.photon_number_g.push(ag.norm_sqr());
    }

    if let Some(nc) = scenario.effective_critical_number() {
        let peak = traj
            .photon_number_e
            .iter()
            .chain(traj.photon_number_g.iter())
            .cloned()
            .fold(0.0, f64::max);
        if peak > 10.0 * nc {
            return Err(ReadoutError::Overflow {
                photons: peak,
                critical: nc,
            });
        }
    }
    Ok(traj)
}

/// Homodyne record over `[0, tau]` from a stored trajectory, with the local
/// oscillator at `homodyne_angle + delta_phi`. Per branch the record is
/// `M = 2 Re[e^{-i(phi_h + delta)} (kappa Int alpha dt - eps tau e^{i theta_d})]`,
/// the output field being `sqrt(kappa) alpha - eps e^{i theta_d}/sqrt(kappa)`;
/// the reflected drive cancels in the branch difference reported here.
pub fn homodyne_record(
    scenario: &ReadoutScenario,
    trajectory: &Trajectory,
    tau: f64,
    delta_phi: f64,
) -> Result<MeasurementRecord, ReadoutError> {
    let t_max = trajectory.horizon();
    if !(0.0..=t_max * (1.0 + 1e-9)).contains(&tau) {
        return Err(ReadoutError::OutsideHorizon { tau, t_max });
    }
    let tau_c = tau.min(t_max);
    let lo = Complex64::from_polar(1.0, -(scenario.homodyne_angle + delta_phi));
    let ie = trajectory.sample(&trajectory.int_alpha_e, tau_c);
    let ig = trajectory.sample(&trajectory.int_alpha_g, tau_c);
    let signal = 2.0 * (lo * (ie - ig) * scenario.kappa).re;
    Ok(noise_and_snr(scenario, tau, signal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::{ang_mhz, TWO_PI};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Fig.-4-style operating point used by several tests below.
    fn strong_point(mechanism: Mechanism) -> ReadoutScenario {
        let kappa = ang_mhz(16.0);
        let chi = ang_mhz(8.0);
        let kerr = -TWO_PI * 100e3;
        match mechanism {
            Mechanism::Ideal => ReadoutScenario::ideal(chi, kappa, chi),
            Mechanism::Idc => ReadoutScenario::idc(chi, kerr, kappa, chi, 0.1),
            Mechanism::Npdc => ReadoutScenario::npdc(chi, kerr, kappa, chi),
        }
    }

    #[test]
    fn validation_rejects_bad_scenarios() {
        let mut s = strong_point(Mechanism::Ideal);
        s.input_noise = InputNoise::SqueezedVacuum;
        assert!(matches!(s.validate(), Err(ReadoutError::UnsupportedNoise)));

        let mut s = strong_point(Mechanism::Ideal);
        s.kerr = -1.0;
        assert!(s.validate().is_err());
        let mut s = strong_point(Mechanism::Ideal);
        s.purcell_enabled = true;
        assert!(s.validate().is_err());

        let mut s = strong_point(Mechanism::Idc);
        s.lambda = 0.0;
        assert!(s.validate().is_err());
        s.lambda = 0.4;
        assert!(s.validate().is_err());

        let mut s = strong_point(Mechanism::Npdc);
        s.purcell_enabled = true;
        assert!(s.validate().is_err());

        let mut s = strong_point(Mechanism::Npdc);
        s.sigma_z_initial = 0.3;
        assert!(s.validate().is_err());

        let mut s = strong_point(Mechanism::Ideal);
        s.kappa = 0.0;
        assert!(s.validate().is_err());

        assert!(strong_point(Mechanism::Idc).validate().is_ok());
        assert!(strong_point(Mechanism::Npdc).validate().is_ok());
    }

    #[test]
    fn ideal_amplitude_reaches_the_rotated_steady_state() {
        let s = strong_point(Mechanism::Ideal);
        let theta = s.rotation_angle();
        assert_abs_diff_eq!(theta, std::f64::consts::FRAC_PI_4, epsilon = 1e-15);

        let t = 60.0 / s.kappa;
        for sz in [1.0, -1.0] {
            let a = ideal_cavity_amplitude(&s, sz, t);
            // |alpha_ss| = (2 eps / kappa) cos theta_q, phase theta_d - sz theta_q.
            assert_relative_eq!(
                a.norm(),
                2.0 * s.drive_amplitude / s.kappa * theta.cos(),
                max_relative = 1e-12
            );
            assert_abs_diff_eq!(a.arg(), s.drive_phase - sz * theta, epsilon = 1e-12);
        }
    }

    #[test]
    fn photon_formula_matches_amplitude_squared() {
        let mut s = strong_point(Mechanism::Ideal);
        s.chi_z = ang_mhz(3.7);
        for i in 0..200 {
            let t = i as f64 * 0.11 / s.kappa;
            let n = intracavity_photons(&s, t);
            for sz in [1.0, -1.0] {
                let a = ideal_cavity_amplitude(&s, sz, t);
                assert_abs_diff_eq!(n, a.norm_sqr(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn steady_photon_number_at_matched_drive_is_one_half() {
        // eps = chi_z = kappa/2 puts theta_q at pi/4; the long-time photon
        // number is (2 eps/kappa)^2 cos^2 theta_q = 1/2.
        let s = strong_point(Mechanism::Ideal);
        let n = intracavity_photons(&s, 80.0 / s.kappa);
        assert_abs_diff_eq!(n, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(s.steady_photons_linear(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn snr_anchor_at_kappa_tau_ten() {
        // At eps = chi_z = kappa/2 and the optimal angles the SNR reduces to
        // sqrt(2 kappa tau) [1 - (2/kappa tau)(1 - e^{-kappa tau/2} cos(kappa tau/2))].
        let s = strong_point(Mechanism::Ideal);
        let tau = 10.0 / s.kappa;
        let rec = ideal_record(&s, tau);
        assert_abs_diff_eq!(rec.noise, 20.0_f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(rec.snr, 3.579_418_3, epsilon = 1e-6);
        assert_abs_diff_eq!(rec.fidelity, fidelity_from_snr(rec.snr), epsilon = 0.0);
        assert!(rec.fidelity > 0.99 && rec.fidelity < 0.997);
    }

    #[test]
    fn snr_matches_matched_drive_closed_form_everywhere() {
        let s = strong_point(Mechanism::Ideal);
        for i in 1..300 {
            let kt = i as f64 * 0.1;
            let tau = kt / s.kappa;
            let closed = (2.0 * s.drive_amplitude / s.kappa)
                * (2.0 * kt).sqrt()
                * (1.0 - 2.0 / kt * (1.0 - (-kt / 2.0).exp() * (kt / 2.0).cos()));
            assert_abs_diff_eq!(ideal_record(&s, tau).snr, closed, epsilon = 1e-10);
        }
    }

    #[test]
    fn required_snr_for_four_nines() {
        let r = required_snr(0.9999);
        assert_abs_diff_eq!(r, 5.2594, epsilon = 1e-3);
        assert_abs_diff_eq!(fidelity_from_snr(r), 0.9999, epsilon = 1e-12);
        // Monotone and symmetric around one half.
        assert!(required_snr(0.999) < r);
        assert_abs_diff_eq!(fidelity_from_snr(-r), 1.0 - 0.9999, epsilon = 1e-12);
    }

    #[test]
    fn langevin_with_no_kerr_reproduces_the_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0a1c);
        for _ in 0..12 {
            let kappa = TWO_PI * rng.gen_range(5e6..25e6);
            let chi = kappa * rng.gen_range(0.1..1.0);
            let eps = kappa * rng.gen_range(0.2..2.0);
            let mut s = ReadoutScenario::npdc(chi, 0.0, kappa, eps);
            s.drive_phase = rng.gen_range(0.0..TWO_PI);
            s.homodyne_angle = rng.gen_range(0.0..TWO_PI);
            let t_max = 15.0 / kappa;
            let traj = integrate_langevin(&s, t_max, 0.008 / kappa).unwrap();

            let mut worst = 0.0_f64;
            for (i, &t) in traj.time_grid.iter().enumerate() {
                let err_e = (traj.alpha_e[i] - ideal_cavity_amplitude(&s, 1.0, t)).norm();
                let err_g = (traj.alpha_g[i] - ideal_cavity_amplitude(&s, -1.0, t)).norm();
                worst = worst.max(err_e).max(err_g);
            }
            assert!(worst < 1e-8, "field deviates from closed form: {worst:.2e}");

            let rec = homodyne_record(&s, &traj, t_max, 0.0).unwrap();
            let err = (rec.signal_separation - separation_signal(&s, t_max)).abs();
            assert!(err < 1e-8, "homodyne record off closed form by {err:.2e}");
        }
    }

    #[test]
    fn idc_branches_mirror_each_other_without_purcell() {
        let mut s = strong_point(Mechanism::Idc);
        s.purcell_enabled = false;
        s.drive_phase = 0.77;
        let traj = integrate_langevin(&s, 40.0 / s.kappa, 0.01 / s.kappa).unwrap();
        let twist = Complex64::from_polar(1.0, 2.0 * s.drive_phase);
        for i in 0..traj.time_grid.len() {
            let mirrored = traj.alpha_e[i].conj() * twist;
            assert!((traj.alpha_g[i] - mirrored).norm() < 1e-9);
            assert_relative_eq!(
                traj.photon_number_e[i],
                traj.photon_number_g[i],
                max_relative = 1e-9,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn npdc_branches_are_asymmetric() {
        let mut s = strong_point(Mechanism::Npdc);
        s.drive_amplitude = 2.0 * s.kappa;
        let traj = integrate_langevin(&s, 30.0 / s.kappa, 0.002 / s.kappa).unwrap();
        let last = traj.time_grid.len() - 1;
        let ne = traj.photon_number_e[last];
        let ng = traj.photon_number_g[last];
        assert!(
            (ne - ng).abs() > 1e-3 * ne.max(ng),
            "kerr should split the branches: {ne} vs {ng}"
        );
        // The negative Kerr drags the excited branch toward resonance, so it
        // holds more photons.
        assert!(ne > ng);
    }

    #[test]
    fn cavity_pull_limits() {
        let idc = strong_point(Mechanism::Idc);
        let p0 = cavity_pull(&idc, 0.0, 0.0);
        assert_abs_diff_eq!(p0.ground, -idc.chi_z, epsilon = 1e-12);
        assert_abs_diff_eq!(p0.excited, idc.chi_z, epsilon = 1e-12);
        // At n = n_c both pulls shrink to half.
        let nc = idc.effective_critical_number().unwrap();
        assert_abs_diff_eq!(nc, 25.0, epsilon = 1e-12);
        let p = cavity_pull(&idc, nc, nc);
        assert_abs_diff_eq!(p.ground, -idc.chi_z / 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.excited, idc.chi_z / 2.0, epsilon = 1e-9);

        let npdc = strong_point(Mechanism::Npdc);
        let p = cavity_pull(&npdc, 20.0, 20.0);
        assert!(p.ground.abs() > npdc.chi_z && p.excited.abs() < npdc.chi_z);
    }

    #[test]
    fn purcell_makes_the_snr_peak_and_fall() {
        let s = strong_point(Mechanism::Idc);
        assert_relative_eq!(s.purcell_rate(), 0.01 * s.kappa, max_relative = 1e-12);
        let t_max = 400.0 / s.kappa;
        let traj = integrate_langevin(&s, t_max, 0.01 / s.kappa).unwrap();

        let mut snrs = Vec::new();
        for i in 1..=200 {
            let tau = t_max * i as f64 / 200.0;
            snrs.push(homodyne_record(&s, &traj, tau, 0.0).unwrap().snr);
        }
        let (imax, &peak) = snrs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!(imax > 0 && imax < snrs.len() - 1, "peak must be interior");
        assert!(
            *snrs.last().unwrap() < 0.9 * peak,
            "snr should decay after the peak"
        );
        // The qubit projection follows the advertised decay law.
        let k = traj.time_grid.len() / 2;
        let expect = 2.0 * (-s.purcell_rate() * traj.time_grid[k]).exp() - 1.0;
        assert_abs_diff_eq!(traj.sigma_z_mean[k], expect, epsilon = 1e-12);
    }

    #[test]
    fn npdc_snr_keeps_growing() {
        let s = strong_point(Mechanism::Npdc);
        let t_max = 400.0 / s.kappa;
        let traj = integrate_langevin(&s, t_max, 0.01 / s.kappa).unwrap();
        let r1 = homodyne_record(&s, &traj, 100.0 / s.kappa, 0.0).unwrap().snr;
        let r2 = homodyne_record(&s, &traj, 400.0 / s.kappa, 0.0).unwrap().snr;
        assert!(r2 > 1.5 * r1);
    }

    #[test]
    fn opposite_local_oscillator_flips_the_record() {
        let s = strong_point(Mechanism::Npdc);
        let traj = integrate_langevin(&s, 20.0 / s.kappa, 0.01 / s.kappa).unwrap();
        let tau = 17.3 / s.kappa;
        let a = homodyne_record(&s, &traj, tau, 0.0).unwrap();
        let b = homodyne_record(&s, &traj, tau, std::f64::consts::PI).unwrap();
        assert_abs_diff_eq!(a.signal_separation, -b.signal_separation, epsilon = 1e-9);
        assert_abs_diff_eq!(a.fidelity + b.fidelity, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn energy_balance_holds_along_a_kerr_trajectory() {
        let s = strong_point(Mechanism::Npdc);
        let traj = integrate_langevin(&s, 10.0 / s.kappa, 0.005 / s.kappa).unwrap();
        let step = traj.time_grid[1] - traj.time_grid[0];
        let drive = Complex64::from_polar(s.drive_amplitude, s.drive_phase);
        let n_peak = traj.photon_number_e.iter().cloned().fold(0.0, f64::max);
        for i in (10..traj.time_grid.len() - 10).step_by(37) {
            let dn = (traj.photon_number_e[i + 1] - traj.photon_number_e[i - 1]) / (2.0 * step);
            let balance =
                dn + s.kappa * traj.photon_number_e[i] - 2.0 * (traj.alpha_e[i].conj() * drive).re;
            assert!(balance.abs() < 1e-4 * s.kappa * n_peak.max(1.0));
        }
    }

    #[test]
    fn overflow_and_step_guards_fire() {
        let mut s = strong_point(Mechanism::Npdc);
        s.drive_amplitude = 4.0 * s.kappa;
        s.critical_photon_number = Some(1.0);
        match integrate_langevin(&s, 10.0 / s.kappa, 0.001 / s.kappa) {
            Err(ReadoutError::Overflow { photons, critical }) => {
                assert!(photons > 10.0 * critical);
            }
            other => panic!("expected overflow, got {other:?}"),
        }

        let s = strong_point(Mechanism::Npdc);
        assert!(matches!(
            integrate_langevin(&s, 10.0 / s.kappa, 1.0 / s.kappa),
            Err(ReadoutError::StepSizeTooLarge { .. })
        ));

        let s = strong_point(Mechanism::Npdc);
        let traj = integrate_langevin(&s, 5.0 / s.kappa, 0.01 / s.kappa).unwrap();
        assert!(matches!(
            homodyne_record(&s, &traj, 6.0 / s.kappa, 0.0),
            Err(ReadoutError::OutsideHorizon { .. })
        ));
    }

    #[test]
    fn coupling_from_circuit_quantities() {
        // 16 MHz per milli-flux-quantum of sensitivity, 15 pH mutual, 60 nA.
        let r = TWO_PI * 16e9;
        let chi = npdc_coupling(r, 15e-12, 60e-9);
        assert!(chi / TWO_PI > 6.8e6 && chi / TWO_PI < 7.1e6);
    }

    #[test]
    fn off_grid_homodyne_times_interpolate_smoothly() {
        let s = strong_point(Mechanism::Npdc);
        let traj = integrate_langevin(&s, 20.0 / s.kappa, 0.01 / s.kappa).unwrap();
        let step = traj.time_grid[1] - traj.time_grid[0];
        let k = 700;
        let on = homodyne_record(&s, &traj, traj.time_grid[k], 0.0).unwrap();
        let off = homodyne_record(&s, &traj, traj.time_grid[k] + 0.4 * step, 0.0).unwrap();
        let slope = (off.signal_separation - on.signal_separation) / (0.4 * step);
        // d M_s / d tau is bounded by 2 kappa |alpha_e - alpha_g| plus the
        // drive term; check the finite difference is of that scale, so the
        // interpolation is not doing anything wild.
        let bound = 4.0 * s.kappa * (traj.alpha_e[k] - traj.alpha_g[k]).norm() + 1e-12;
        assert!(slope.abs() <= bound * 1.5);
    }
}
