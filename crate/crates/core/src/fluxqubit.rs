//! Gradiometric four-junction flux qubit solved in the two-dimensional charge
//! basis: two-level spectrum, circulating currents (matrix elements and
//! thermodynamic derivatives as independent routes), flux-noise decoherence
//! and flux sweeps.
//!
//! Junction energies are angular (rad/s) like everything else in this crate.
//! The two main-loop junctions carry phase differences phi_1, phi_2; the two
//! alpha-loop junctions are eliminated through fluxoid quantization, leaving
//! phi_{3,4} = -pi(n + f_eps) - (phi_1 + phi_2) -/+ pi f_alpha.

use crate::consts::{ang_mhz, HBAR, PHI0, PLANCK_H};
use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Circuit parameters and flux biases of the gradiometric flux qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitSpec {
    /// Main-loop junction Josephson energy E_J, rad/s.
    pub main_josephson_energy: f64,
    /// E_J / E_C.
    pub charging_ratio: f64,
    /// Alpha-junction scale alpha_0; each alpha-loop junction carries
    /// alpha_0 * E_J.
    pub alpha_junction_scale: f64,
    /// Flux through the alpha loop, units of PHI0.
    pub f_alpha: f64,
    /// Energy-bias flux (difference of the two gradiometric loops), units of
    /// PHI0. Zero is the degeneracy point.
    pub f_epsilon: f64,
    /// Trapped fluxoid difference n between the gradiometric loops. Odd n
    /// frustrates the joint junction term and produces the double well.
    pub trapped_fluxoid_offset: i32,
}

impl QubitSpec {
    /// 320 GHz main junctions, E_J/E_C = 70, one trapped fluxoid, degeneracy
    /// point: the parameter set used throughout the numerical studies here.
    pub fn benchmark(two_alpha0: f64, f_alpha: f64) -> Self {
        QubitSpec {
            main_josephson_energy: crate::consts::ang_ghz(320.0),
            charging_ratio: 70.0,
            alpha_junction_scale: 0.5 * two_alpha0,
            f_alpha,
            f_epsilon: 0.0,
            trapped_fluxoid_offset: 1,
        }
    }

    pub fn charging_energy(&self) -> f64 {
        self.main_josephson_energy / self.charging_ratio
    }

    /// Effective alpha-junction weight 2 alpha_0 cos(pi f_alpha).
    pub fn alpha_prime(&self) -> f64 {
        2.0 * self.alpha_junction_scale * (PI * self.f_alpha).cos()
    }

    /// Double-well treatment holds for alpha' strictly inside (1/2, 1).
    pub fn double_well_valid(&self) -> bool {
        let a = self.alpha_prime();
        0.5 < a && a < 1.0
    }

    /// Critical current of one alpha-loop junction, amperes.
    pub fn critical_current(&self) -> f64 {
        2.0 * PI * self.alpha_junction_scale * HBAR * self.main_josephson_energy / PHI0
    }

    pub fn validate(&self) -> Result<(), FluxQubitError> {
        if !(self.main_josephson_energy > 0.0) || !(self.charging_ratio > 0.0) {
            return Err(FluxQubitError::InvalidSpec(
                "main_josephson_energy and charging_ratio must be positive".into(),
            ));
        }
        if self.alpha_junction_scale < 0.0 {
            return Err(FluxQubitError::InvalidSpec(
                "alpha_junction_scale must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Phase offset of the joint junction term, pi (n + f_eps).
    fn joint_phase(&self) -> f64 {
        PI * (self.trapped_fluxoid_offset as f64 + self.f_epsilon)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FluxQubitError {
    #[error("charge cutoff {0} too small; need at least 4 per axis")]
    CutoffTooSmall(usize),
    #[error("qubit frequency not converged at cutoff {cutoff}: residual {residual:.3e}")]
    NoConvergence { cutoff: usize, residual: f64 },
    #[error("level splitting {omega_q:.3e} rad/s below 2 pi x 1 MHz: flux derivative ill-defined")]
    DegeneracyError { omega_q: f64 },
    #[error("finite-difference step {0} outside [1e-6, 1e-3]")]
    BadStep(f64),
    #[error("invalid qubit spec: {0}")]
    InvalidSpec(String),
}

/// Two-level solution with currents and convergence record.
#[derive(Debug, Clone)]
pub struct QubitSolution {
    /// Level splitting E_1 - E_0, rad/s.
    pub qubit_frequency: f64,
    /// Ground and first-excited energies, rad/s.
    pub energies: (f64, f64),
    /// Charge-basis coefficients, index (n_1 + c) * (2c+1) + (n_2 + c).
    pub ground: Array1<Complex64>,
    pub excited: Array1<Complex64>,
    pub i_plus: f64,
    pub i_minus: f64,
    /// Persistent current per gradiometric loop I_p = I_p'/2, amperes.
    pub i_persistent: f64,
    /// Cutoff the solution converged at.
    pub cutoff: usize,
    /// Relative qubit-frequency change over the last cutoff escalation.
    pub convergence_residual: f64,
    pub double_well_valid: bool,
}

/// Signed circulating currents from eigenvector matrix elements, amperes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirculatingCurrents {
    pub i_plus: f64,
    pub i_minus: f64,
    /// I_p = I_p'/2; the gradiometric topology splits the persistent current
    /// over two symmetric loops.
    pub i_persistent: f64,
}

/// Currents recovered from flux derivatives of the spectrum, amperes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoCurrents {
    pub i_minus: f64,
    pub i_persistent: f64,
}

/// Noise environment of the qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitNoiseSpec {
    /// Transverse noise power at the qubit frequency, seconds.
    pub transverse_noise_power: f64,
    /// 1/f flux-noise amplitude of the alpha loop, units of PHI0.
    pub alpha_loop_flux_noise: f64,
}

impl QubitNoiseSpec {
    pub fn validate(&self) -> Result<(), FluxQubitError> {
        if self.transverse_noise_power < 0.0 || self.alpha_loop_flux_noise < 0.0 {
            return Err(FluxQubitError::InvalidSpec(
                "noise amplitudes must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitDecoherence {
    /// Relaxation rate Gamma_1, 1/s.
    pub relaxation_rate: f64,
    /// Pure dephasing rate Gamma_f, 1/s.
    pub dephasing_rate: f64,
    /// Lifetimes; +infinity when the corresponding rate vanishes.
    pub t1: f64,
    pub t2: f64,
}

/// One row of a flux sweep.
#[derive(Debug, Clone)]
pub struct QubitSweepRow {
    pub f_alpha: f64,
    pub outcome: Result<QubitPoint, FluxQubitError>,
}

#[derive(Debug, Clone, Copy)]
pub struct QubitPoint {
    pub qubit_frequency: f64,
    pub alpha_prime: f64,
    pub double_well_valid: bool,
    pub i_minus: f64,
    pub i_persistent: f64,
    pub t1: f64,
    pub t2: f64,
}

struct Basis {
    cutoff: i64,
    per_axis: usize,
}

impl Basis {
    fn new(cutoff: usize) -> Self {
        Basis {
            cutoff: cutoff as i64,
            per_axis: 2 * cutoff + 1,
        }
    }

    fn dim(&self) -> usize {
        self.per_axis * self.per_axis
    }

    fn idx(&self, n1: i64, n2: i64) -> usize {
        ((n1 + self.cutoff) as usize) * self.per_axis + (n2 + self.cutoff) as usize
    }
}

/// Circuit Hamiltonian in the charge basis |n_1, n_2>, dimension (2 cutoff+1)^2.
///
/// Kinetic part is diagonal; cos phi_i are nearest-neighbour hops along one
/// axis; the joint term cos(phi_1 + phi_2 + pi(n + f_eps)) hops both axes at
/// once and carries the flux phase. Real whenever f_eps = 0.
pub fn build_hamiltonian(
    spec: &QubitSpec,
    cutoff: usize,
) -> Result<Array2<Complex64>, FluxQubitError> {
    if cutoff < 4 {
        return Err(FluxQubitError::CutoffTooSmall(cutoff));
    }
    spec.validate()?;
    let basis = Basis::new(cutoff);
    let n = basis.dim();
    let ej = spec.main_josephson_energy;
    let ec = spec.charging_energy();
    let a0 = spec.alpha_junction_scale;
    let kin = 4.0 * ec / (1.0 + 4.0 * a0);
    let theta = spec.joint_phase();
    // Exact zero imaginary part at the degeneracy point keeps the fast real
    // eigensolve path.
    let joint_phase = if spec.f_epsilon == 0.0 {
        Complex64::new(if spec.trapped_fluxoid_offset % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
    } else {
        Complex64::from_polar(1.0, theta)
    };
    let joint_amp = -a0 * ej * (PI * spec.f_alpha).cos() * joint_phase;
    let hop = Complex64::new(-0.5 * ej, 0.0);

    let mut h = Array2::<Complex64>::zeros((n, n));
    let c = basis.cutoff;
    for n1 in -c..=c {
        for n2 in -c..=c {
            let i = basis.idx(n1, n2);
            let diag = kin
                * ((1.0 + 2.0 * a0) * ((n1 * n1 + n2 * n2) as f64)
                    - 4.0 * a0 * (n1 * n2) as f64)
                + ej * (2.0 + 2.0 * a0);
            h[(i, i)] = Complex64::new(diag, 0.0);
            if n1 < c {
                let j = basis.idx(n1 + 1, n2);
                h[(j, i)] += hop;
                h[(i, j)] += hop;
            }
            if n2 < c {
                let j = basis.idx(n1, n2 + 1);
                h[(j, i)] += hop;
                h[(i, j)] += hop;
            }
            if n1 < c && n2 < c {
                let j = basis.idx(n1 + 1, n2 + 1);
                h[(j, i)] += joint_amp;
                h[(i, j)] += joint_amp.conj();
            }
        }
    }
    Ok(h)
}

/// Two lowest eigenpairs of a Hermitian matrix.
///
/// A complex-Hermitian H = A + iB embeds into the real symmetric
/// [[A, -B], [B, A]], where every eigenvalue of H appears twice and a doubled
/// eigenvector (u, v) maps back to u + iv.
fn lowest_two(h: &Array2<Complex64>) -> ((f64, Array1<Complex64>), (f64, Array1<Complex64>)) {
    let n = h.nrows();
    let is_real = h.iter().all(|z| z.im == 0.0);
    if is_real {
        let m = DMatrix::from_fn(n, n, |i, j| h[(i, j)].re);
        let eig = m.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let take = |k: usize| {
            let col = eig.eigenvectors.column(order[k]);
            (
                eig.eigenvalues[order[k]],
                Array1::from_iter(col.iter().map(|&x| Complex64::new(x, 0.0))),
            )
        };
        (take(0), take(1))
    } else {
        let m = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let z = h[(i % n, j % n)];
            match (i < n, j < n) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        });
        let eig = m.symmetric_eigen();
        let mut order: Vec<usize> = (0..2 * n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let take = |k: usize| {
            let col = eig.eigenvectors.column(order[k]);
            let v = Array1::from_iter(
                (0..n).map(|i| Complex64::new(col[i], col[i + n])),
            );
            (eig.eigenvalues[order[k]], v)
        };
        let (e0, g) = take(0);
        // Indices 0,1 are the doubled pair of the ground level; index 2 opens
        // the next physical level.
        let (e1, mut x) = take(2);
        let overlap: Complex64 = g.iter().zip(x.iter()).map(|(a, b)| a.conj() * b).sum();
        for (xi, gi) in x.iter_mut().zip(g.iter()) {
            *xi -= overlap * gi;
        }
        let norm: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        x.mapv_inplace(|z| z / norm);
        ((e0, g), (e1, x))
    }
}

fn eigensolve_raw(
    spec: &QubitSpec,
    cutoff: usize,
) -> Result<(f64, f64, Array1<Complex64>, Array1<Complex64>), FluxQubitError> {
    let h = build_hamiltonian(spec, cutoff)?;
    let ((e0, g), (e1, x)) = lowest_two(&h);
    Ok((e0, e1, g, x))
}

/// <a| e^{i phi_+} |b> where e^{i phi_+} raises both charge indices.
fn raise_element(a: &Array1<Complex64>, b: &Array1<Complex64>, basis: &Basis) -> Complex64 {
    let c = basis.cutoff;
    let mut acc = Complex64::new(0.0, 0.0);
    for n1 in -c..c {
        for n2 in -c..c {
            acc += a[basis.idx(n1 + 1, n2 + 1)].conj() * b[basis.idx(n1, n2)];
        }
    }
    acc
}

fn cos_sin_plus_elements(
    a: &Array1<Complex64>,
    b: &Array1<Complex64>,
    basis: &Basis,
) -> (Complex64, Complex64) {
    let up = raise_element(a, b, basis);
    let down = raise_element(b, a, basis).conj();
    let cos = 0.5 * (up + down);
    let sin = (up - down) / Complex64::new(0.0, 2.0);
    (cos, sin)
}

/// Circulating currents from matrix elements of the junction-3/4 current
/// operators in the two-level eigenbasis.
///
/// The alpha-loop current operator reduces to
/// -I_c sin(pi f_alpha) cos(phi_+ + pi(n + f_eps)); the main-loop persistent
/// current is carried by the off-diagonal element of
/// -2 I_c cos(pi f_alpha) sin(phi_+ + pi(n + f_eps)).
pub fn circulating_currents(
    spec: &QubitSpec,
    ground: &Array1<Complex64>,
    excited: &Array1<Complex64>,
) -> CirculatingCurrents {
    let per_axis = (ground.len() as f64).sqrt().round() as usize;
    let basis = Basis::new((per_axis - 1) / 2);
    let ic = spec.critical_current();
    let theta = spec.joint_phase();
    let (ct, st) = (theta.cos(), theta.sin());

    let (cos_gg, sin_gg) = cos_sin_plus_elements(ground, ground, &basis);
    let (cos_ee, sin_ee) = cos_sin_plus_elements(excited, excited, &basis);
    // cos(phi_+ + theta) = cos theta cos phi_+ - sin theta sin phi_+.
    let i3_gg = -ic * (PI * spec.f_alpha).sin() * (ct * cos_gg.re - st * sin_gg.re);
    let i3_ee = -ic * (PI * spec.f_alpha).sin() * (ct * cos_ee.re - st * sin_ee.re);

    let (cos_eg, sin_eg) = cos_sin_plus_elements(excited, ground, &basis);
    let sin_shift = st * cos_eg + ct * sin_eg;
    let ip_primed = 2.0 * ic * (PI * spec.f_alpha).cos().abs() * sin_shift.norm();

    // i_minus is the full excited-minus-ground difference, not its half: the
    // benchmark current scale (about 50 nA at the readout bias, which sets the
    // MHz-scale longitudinal coupling and the microsecond dephasing) is stated
    // for the unhalved difference.
    CirculatingCurrents {
        i_plus: 0.5 * (i3_ee + i3_gg),
        i_minus: i3_ee - i3_gg,
        i_persistent: 0.5 * ip_primed,
    }
}

/// Two lowest levels with cutoff escalation: solve at `cutoff` and `cutoff+2`,
/// accept once the splitting moves by less than 1e-6 relative (floored at
/// 2 pi x 1 MHz so closed gaps cannot stall), escalating to at most 16.
pub fn solve_two_levels(
    spec: &QubitSpec,
    cutoff: usize,
) -> Result<QubitSolution, FluxQubitError> {
    if cutoff < 4 {
        return Err(FluxQubitError::CutoffTooSmall(cutoff));
    }
    let floor = ang_mhz(1.0);
    // Escalation compares (c, c+2) pairs up to 16, so start no higher than 14.
    let mut c = cutoff.min(14);
    let mut prev = eigensolve_raw(spec, c)?;
    loop {
        let next_c = c + 2;
        let next = eigensolve_raw(spec, next_c)?;
        let wq_prev = prev.1 - prev.0;
        let wq = next.1 - next.0;
        let residual = (wq - wq_prev).abs() / wq.abs().max(floor);
        if residual < 1e-6 {
            let (e0, e1, ground, excited) = next;
            let currents = circulating_currents(spec, &ground, &excited);
            return Ok(QubitSolution {
                qubit_frequency: e1 - e0,
                energies: (e0, e1),
                ground,
                excited,
                i_plus: currents.i_plus,
                i_minus: currents.i_minus,
                i_persistent: currents.i_persistent,
                cutoff: next_c,
                convergence_residual: residual,
                double_well_valid: spec.double_well_valid(),
            });
        }
        if next_c == 16 {
            return Err(FluxQubitError::NoConvergence {
                cutoff: next_c,
                residual,
            });
        }
        c = next_c;
        prev = next;
    }
}

/// Currents recovered from flux derivatives of the spectrum at fixed cutoff:
/// the splitting slope against f_alpha gives I_-, and the off-diagonal element
/// of the finite-differenced Hamiltonian against f_eps gives I_p.
///
/// In the gauge used here the alpha-loop relation carries a minus sign,
/// I_- = -hbar (d omega_q / d f_alpha) / PHI0, which is what makes the two
/// routes agree including sign.
pub fn thermodynamic_currents(
    spec: &QubitSpec,
    cutoff: usize,
    step: f64,
) -> Result<ThermoCurrents, FluxQubitError> {
    if !(1e-6..=1e-3).contains(&step) {
        return Err(FluxQubitError::BadStep(step));
    }
    let (e0, e1, ground, excited) = eigensolve_raw(spec, cutoff)?;
    let omega_q = e1 - e0;
    if omega_q < ang_mhz(1.0) {
        return Err(FluxQubitError::DegeneracyError { omega_q });
    }

    let splitting_at = |f_alpha: f64| -> Result<f64, FluxQubitError> {
        let shifted = QubitSpec { f_alpha, ..*spec };
        let (e0, e1, _, _) = eigensolve_raw(&shifted, cutoff)?;
        Ok(e1 - e0)
    };
    let dwq = (splitting_at(spec.f_alpha + step)? - splitting_at(spec.f_alpha - step)?)
        / (2.0 * step);
    let i_minus = -HBAR * dwq / PHI0;

    let h_plus = build_hamiltonian(
        &QubitSpec {
            f_epsilon: spec.f_epsilon + step,
            ..*spec
        },
        cutoff,
    )?;
    let h_minus = build_hamiltonian(
        &QubitSpec {
            f_epsilon: spec.f_epsilon - step,
            ..*spec
        },
        cutoff,
    )?;
    let mut elem = Complex64::new(0.0, 0.0);
    for i in 0..h_plus.nrows() {
        for j in 0..h_plus.ncols() {
            let dh = (h_plus[(i, j)] - h_minus[(i, j)]) / Complex64::new(2.0 * step, 0.0);
            elem += excited[i].conj() * dh * ground[j];
        }
    }
    // <e| dH/df_eps |g> = (I_p'/2) PHI0 / hbar in angular units.
    let ip_primed = 2.0 * HBAR * elem.norm() / PHI0;
    Ok(ThermoCurrents {
        i_minus,
        i_persistent: 0.5 * ip_primed,
    })
}

/// Relaxation and pure dephasing from transverse noise power and alpha-loop
/// 1/f flux noise. Prefactors are pinned by the benchmark lifetimes: 300 nA of
/// persistent current with 2.5e-19 s of noise power relaxes in ~9 us, and
/// 50 nA of circulating-current difference at amplitude 5e-6 dephases in
/// ~1.3 us.
pub fn qubit_decoherence(solution: &QubitSolution, noise: &QubitNoiseSpec) -> QubitDecoherence {
    let relaxation_rate = 0.5
        * (solution.i_persistent * PHI0 / PLANCK_H).powi(2)
        * noise.transverse_noise_power;
    let dephasing_rate = noise.alpha_loop_flux_noise * solution.i_minus.abs() * PHI0 / PLANCK_H;
    let invert = |rate: f64| if rate > 0.0 { 1.0 / rate } else { f64::INFINITY };
    QubitDecoherence {
        relaxation_rate,
        dephasing_rate,
        t1: invert(relaxation_rate),
        t2: invert(dephasing_rate),
    }
}

/// Solve the qubit across an f_alpha grid; rows fail independently.
pub fn sweep_qubit(
    template: &QubitSpec,
    grid: &[f64],
    cutoff: usize,
    noise: &QubitNoiseSpec,
) -> Vec<QubitSweepRow> {
    grid.iter()
        .map(|&f_alpha| {
            let spec = QubitSpec { f_alpha, ..*template };
            let outcome = solve_two_levels(&spec, cutoff).map(|sol| {
                let deco = qubit_decoherence(&sol, noise);
                QubitPoint {
                    qubit_frequency: sol.qubit_frequency,
                    alpha_prime: spec.alpha_prime(),
                    double_well_valid: sol.double_well_valid,
                    i_minus: sol.i_minus,
                    i_persistent: sol.i_persistent,
                    t1: deco.t1,
                    t2: deco.t2,
                }
            });
            QubitSweepRow { f_alpha, outcome }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::{ang_ghz, to_hz};

    fn hermiticity_defect(h: &Array2<Complex64>) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
            }
        }
        worst
    }

    #[test]
    fn hamiltonian_is_hermitian_with_complex_phase() {
        let spec = QubitSpec {
            f_alpha: 0.17,
            f_epsilon: 0.13,
            ..QubitSpec::benchmark(0.75, 0.17)
        };
        let h = build_hamiltonian(&spec, 5).unwrap();
        assert!(hermiticity_defect(&h) < 1e-12 * spec.main_josephson_energy);
    }

    #[test]
    fn charge_conjugation_symmetry_at_degeneracy_point() {
        let spec = QubitSpec::benchmark(0.75, 0.22);
        let cutoff = 8usize;
        let h = build_hamiltonian(&spec, cutoff).unwrap();
        let basis = Basis::new(cutoff);
        let c = basis.cutoff;
        // n_i -> -n_i leaves H elementwise invariant when f_eps = 0.
        let mut worst: f64 = 0.0;
        for n1 in -c..=c {
            for n2 in -c..=c {
                for m1 in -c..=c {
                    for m2 in -c..=c {
                        let a = h[(basis.idx(n1, n2), basis.idx(m1, m2))];
                        let b = h[(basis.idx(-n1, -n2), basis.idx(-m1, -m2))];
                        worst = worst.max((a - b).norm());
                    }
                }
            }
        }
        assert!(worst < 1e-12 * spec.main_josephson_energy);
    }

    #[test]
    fn decoupled_junctions_match_one_dimensional_oracle() {
        // alpha_0 = 0 removes the joint term and the kinetic cross-term, so
        // the spectrum is a sum of two independent single-junction spectra.
        let spec = QubitSpec {
            alpha_junction_scale: 0.0,
            ..QubitSpec::benchmark(0.0, 0.0)
        };
        let cutoff = 8usize;
        let h = build_hamiltonian(&spec, cutoff).unwrap();
        let n = h.nrows();
        let m = DMatrix::from_fn(n, n, |i, j| h[(i, j)].re);
        let mut levels = m.symmetric_eigen().eigenvalues.as_slice().to_vec();
        levels.sort_by(f64::total_cmp);

        let dim1 = 2 * cutoff + 1;
        let ej = spec.main_josephson_energy;
        let ec = spec.charging_energy();
        let m1 = DMatrix::from_fn(dim1, dim1, |i, j| {
            let ni = i as f64 - cutoff as f64;
            if i == j {
                4.0 * ec * ni * ni + ej
            } else if i.abs_diff(j) == 1 {
                -0.5 * ej
            } else {
                0.0
            }
        });
        let mut one_d = m1.symmetric_eigen().eigenvalues.as_slice().to_vec();
        one_d.sort_by(f64::total_cmp);
        let mut sums: Vec<f64> = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| one_d[i] + one_d[j])
            .collect();
        sums.sort_by(f64::total_cmp);
        for k in 0..5 {
            assert!(
                (levels[k] - sums[k]).abs() / sums[k].abs() < 1e-9,
                "level {k}: 2D {:.6e} vs oracle {:.6e}",
                levels[k],
                sums[k]
            );
        }
    }

    #[test]
    fn tiny_cutoff_rejected() {
        let spec = QubitSpec::benchmark(0.75, 0.0);
        assert!(matches!(
            build_hamiltonian(&spec, 3),
            Err(FluxQubitError::CutoffTooSmall(3))
        ));
        assert!(matches!(
            solve_two_levels(&spec, 2),
            Err(FluxQubitError::CutoffTooSmall(2))
        ));
    }

    #[test]
    fn gap_tunable_point_has_two_ghz_splitting_and_no_alpha_current() {
        let spec = QubitSpec::benchmark(0.75, 0.0);
        let sol = solve_two_levels(&spec, 10).unwrap();
        let ghz = to_hz(sol.qubit_frequency) / 1e9;
        assert!((ghz - 2.0).abs() / 2.0 < 0.10, "wq/2pi = {ghz:.3} GHz");
        assert!(sol.i_minus.abs() < 1e-9, "I- = {:.2e} A", sol.i_minus);
        assert!(sol.double_well_valid);
        assert!(sol.convergence_residual < 1e-6);
        assert!(sol.cutoff <= 12);

        let norm_g: f64 = sol.ground.iter().map(|z| z.norm_sqr()).sum();
        let norm_e: f64 = sol.excited.iter().map(|z| z.norm_sqr()).sum();
        let overlap: Complex64 = sol
            .ground
            .iter()
            .zip(sol.excited.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        assert!((norm_g - 1.0).abs() < 1e-10);
        assert!((norm_e - 1.0).abs() < 1e-10);
        assert!(overlap.norm() < 1e-10);
    }

    #[test]
    fn readout_bias_carries_fifty_nanoamp_alpha_current() {
        let spec = QubitSpec::benchmark(0.75, 0.22);
        let sol = solve_two_levels(&spec, 10).unwrap();
        let na = sol.i_minus.abs() * 1e9;
        assert!((na - 50.0).abs() / 50.0 < 0.20, "|I-| = {na:.1} nA");
        // Opening the alpha flux raises the splitting well above the 2 GHz of
        // the f_alpha = 0 point.
        let base = solve_two_levels(&QubitSpec::benchmark(0.75, 0.0), 10).unwrap();
        assert!(sol.qubit_frequency > base.qubit_frequency);

        let noise = QubitNoiseSpec {
            transverse_noise_power: 2.5e-19,
            alpha_loop_flux_noise: 5e-6,
        };
        let deco = qubit_decoherence(&sol, &noise);
        let t2_us = deco.t2 * 1e6;
        assert!((0.5..2.5).contains(&t2_us), "T2 = {t2_us:.2} us");
    }

    #[test]
    fn persistent_current_scale_at_symmetric_point() {
        let sol = solve_two_levels(&QubitSpec::benchmark(1.0, 0.0), 10).unwrap();
        let na = sol.i_persistent * 1e9;
        assert!((na - 300.0).abs() / 300.0 < 0.20, "Ip = {na:.0} nA");
        let noise = QubitNoiseSpec {
            transverse_noise_power: 2.5e-19,
            alpha_loop_flux_noise: 5e-6,
        };
        let deco = qubit_decoherence(&sol, &noise);
        let t1_us = deco.t1 * 1e6;
        assert!((4.5..18.0).contains(&t1_us), "T1 = {t1_us:.1} us");
    }

    #[test]
    fn gap_closes_for_full_alpha_at_zero_flux() {
        let sol = solve_two_levels(&QubitSpec::benchmark(1.0, 0.0), 10).unwrap();
        assert!(to_hz(sol.qubit_frequency) < 1e8);
        assert!(!sol.double_well_valid, "alpha' = 1 sits on the validity edge");
    }

    #[test]
    fn thermodynamic_route_agrees_with_matrix_elements() {
        let spec = QubitSpec::benchmark(0.75, 0.22);
        let sol = solve_two_levels(&spec, 10).unwrap();
        let thermo = thermodynamic_currents(&spec, sol.cutoff, 1e-4).unwrap();
        assert!(
            (thermo.i_minus - sol.i_minus).abs() / sol.i_minus.abs() < 1e-3,
            "I-: thermo {:.6e} vs matrix {:.6e}",
            thermo.i_minus,
            sol.i_minus
        );
        assert!(
            (thermo.i_persistent - sol.i_persistent).abs() / sol.i_persistent < 1e-3,
            "Ip: thermo {:.6e} vs matrix {:.6e}",
            thermo.i_persistent,
            sol.i_persistent
        );
    }

    #[test]
    fn splitting_is_stationary_at_zero_alpha_flux() {
        let thermo = thermodynamic_currents(&QubitSpec::benchmark(0.75, 0.0), 10, 1e-4).unwrap();
        assert!(thermo.i_minus.abs() < 1e-12, "I- = {:.2e}", thermo.i_minus);
    }

    #[test]
    fn thermodynamic_route_guards() {
        // A heavy qubit (E_J/E_C = 150) at alpha' = 1 closes the gap below
        // 2 pi x 1 MHz, where the splitting derivative is meaningless.
        let heavy = QubitSpec {
            charging_ratio: 150.0,
            ..QubitSpec::benchmark(1.0, 0.0)
        };
        assert!(matches!(
            thermodynamic_currents(&heavy, 10, 1e-4),
            Err(FluxQubitError::DegeneracyError { .. })
        ));
        assert!(matches!(
            thermodynamic_currents(&QubitSpec::benchmark(0.75, 0.22), 10, 1e-2),
            Err(FluxQubitError::BadStep(_))
        ));
    }

    #[test]
    fn decoherence_reproduces_benchmark_lifetimes() {
        // 300 nA persistent current and 50 nA alpha-loop difference.
        let sol = QubitSolution {
            qubit_frequency: ang_ghz(2.0),
            energies: (0.0, ang_ghz(2.0)),
            ground: Array1::zeros(1),
            excited: Array1::zeros(1),
            i_plus: 0.0,
            i_minus: 50e-9,
            i_persistent: 300e-9,
            cutoff: 10,
            convergence_residual: 0.0,
            double_well_valid: true,
        };
        let noise = QubitNoiseSpec {
            transverse_noise_power: 2.5e-19,
            alpha_loop_flux_noise: 5e-6,
        };
        let deco = qubit_decoherence(&sol, &noise);
        assert!((deco.t1 * 1e6 - 9.1).abs() < 0.2, "T1 = {:.2} us", deco.t1 * 1e6);
        assert!((deco.t2 * 1e6 - 1.28).abs() < 0.05, "T2 = {:.2} us", deco.t2 * 1e6);

        let silent = QubitNoiseSpec {
            transverse_noise_power: 2.5e-19,
            alpha_loop_flux_noise: 0.0,
        };
        let deco = qubit_decoherence(&sol, &silent);
        assert_eq!(deco.dephasing_rate, 0.0);
        assert!(deco.t2.is_infinite());
    }

    #[test]
    fn sweep_symmetry_and_current_growth() {
        let template = QubitSpec::benchmark(0.75, 0.0);
        let noise = QubitNoiseSpec {
            transverse_noise_power: 2.5e-19,
            alpha_loop_flux_noise: 5e-6,
        };
        let grid = [-0.22, -0.1, 0.0, 0.1, 0.22, 0.35];
        let rows = sweep_qubit(&template, &grid, 8, &noise);
        assert_eq!(rows.len(), grid.len());
        let pt = |i: usize| rows[i].outcome.as_ref().unwrap();

        // Even splitting, odd current under flux reversal.
        assert!((pt(0).qubit_frequency - pt(4).qubit_frequency).abs()
            < 1e-9 * pt(4).qubit_frequency);
        assert!((pt(0).i_minus + pt(4).i_minus).abs() < 1e-9 * pt(4).i_minus.abs());
        assert!((pt(1).qubit_frequency - pt(3).qubit_frequency).abs()
            < 1e-9 * pt(3).qubit_frequency);

        let magnitudes: Vec<f64> = [2, 3, 4].iter().map(|&i| pt(i).i_minus.abs()).collect();
        assert!(magnitudes[0] < magnitudes[1] && magnitudes[1] < magnitudes[2]);

        // alpha' = 0.75 cos(0.35 pi) falls below 1/2: flagged, not an error.
        assert!(!pt(5).double_well_valid);
        assert!(pt(4).double_well_valid);

        assert!(sweep_qubit(&template, &[], 8, &noise).is_empty());
    }
}
