//! Full quantum treatment of the driven readout cavity on a truncated Fock
//! space: Lindblad evolution, Wigner rendering, measurement-noise curves from
//! two-time correlations, and operator-level QND checks.
//!
//! The cavity (optionally tensored with the qubit) evolves under
//! `H = chi_z sigma_z n + K a^dag a^dag a a [sigma_z for IDC] + i eps (a^dag e^{i theta_d} - a e^{-i theta_d})`
//! with collapse `sqrt(kappa) a`, plus `sqrt(Gamma_p) sigma_-` when Purcell
//! decay is enabled. The drive term is the Hermitian generator whose Ehrenfest
//! equation reproduces the semiclassical `+eps e^{i theta_d}`; everything is in
//! the frame rotating at the drive.
//!
//! The Liouvillian is never materialized: the Hamiltonian is banded and the
//! collapse operators are shift or block-copy maps, so the generator acts on a
//! density matrix in O(dim^2). Dense matrices appear only in states.

use num_complex::Complex64;
use thiserror::Error;

use crate::ode::Rk45;
use crate::readout::{Mechanism, ReadoutScenario};

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("Fock cutoff {0} too small, need at least 8")]
    CutoffTooSmall(usize),
    #[error("boundary Fock occupation {occupation:.3e} exceeds {limit:.1e}; raise the cutoff")]
    TruncationBreach { occupation: f64, limit: f64 },
    #[error("Wigner grid misses normalization by {missing:.3e}")]
    GridTooCoarse { missing: f64 },
    #[error("integration step collapsed at t = {t:.3e} s")]
    StepCollapse { t: f64 },
    #[error("invalid quantum setup: {0}")]
    Invalid(String),
    #[error(transparent)]
    Scenario(#[from] crate::readout::ReadoutError),
}

/// Whether the qubit enters as a fixed projection or as a live tensor factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QubitCoupling {
    /// Qubit frozen at sigma_z = +1 or -1; cavity-only dynamics.
    Fixed(f64),
    /// Two-level qubit tensored in; index 0 is the excited state.
    Tensored,
}

/// Density matrix plus the bookkeeping needed to trust it.
#[derive(Debug, Clone)]
pub struct DensityState {
    /// Fock cutoff of the cavity factor.
    pub dimension: usize,
    pub include_qubit: bool,
    /// Row-major complex matrix of size `dim x dim` where `dim` is
    /// `dimension` or `2 * dimension`; basis index is `q * dimension + k`.
    pub matrix: Vec<Complex64>,
    pub time: f64,
}

impl DensityState {
    pub fn dim(&self) -> usize {
        if self.include_qubit {
            2 * self.dimension
        } else {
            self.dimension
        }
    }

    /// Cavity vacuum, optionally tensored with a definite qubit state.
    pub fn vacuum(dimension: usize, qubit: Option<QubitCoupling>) -> Self {
        let include_qubit = matches!(qubit, Some(QubitCoupling::Tensored));
        let dim = if include_qubit {
            2 * dimension
        } else {
            dimension
        };
        let mut matrix = vec![Complex64::ZERO; dim * dim];
        // Tensored preparation starts in the excited state; Purcell decay is
        // what makes the excited branch interesting.
        matrix[0] = Complex64::ONE;
        DensityState {
            dimension,
            include_qubit,
            matrix,
            time: 0.0,
        }
    }

    /// Pure cavity state from Fock-basis amplitudes.
    pub fn from_amplitudes(amps: &[Complex64]) -> Self {
        let n = amps.len();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let mut matrix = vec![Complex64::ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                matrix[i * n + j] = amps[i] * amps[j].conj() / (norm * norm);
            }
        }
        DensityState {
            dimension: n,
            include_qubit: false,
            matrix,
            time: 0.0,
        }
    }

    /// Truncated coherent state |beta>.
    pub fn coherent(dimension: usize, beta: Complex64) -> Self {
        let mut amps = Vec::with_capacity(dimension);
        let mut a = Complex64::ONE;
        for k in 0..dimension {
            if k > 0 {
                a *= beta / (k as f64).sqrt();
            }
            amps.push(a);
        }
        let mut st = Self::from_amplitudes(&amps);
        st.dimension = dimension;
        st
    }

    pub fn trace(&self) -> Complex64 {
        let dim = self.dim();
        (0..dim).map(|i| self.matrix[i * dim + i]).sum()
    }

    pub fn purity(&self) -> f64 {
        let dim = self.dim();
        let mut p = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                p += (self.matrix[i * dim + j] * self.matrix[j * dim + i]).re;
            }
        }
        p
    }

    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..dim {
            for j in i..dim {
                let d = (self.matrix[i * dim + j] - self.matrix[j * dim + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Population of the top Fock level, summed over qubit sectors.
    pub fn boundary_occupation(&self) -> f64 {
        let dim = self.dim();
        let mut occ = 0.0;
        let mut k = self.dimension - 1;
        while k < dim {
            occ += self.matrix[k * dim + k].re;
            k += self.dimension;
        }
        occ
    }

    /// Cavity-reduced density matrix (qubit traced out if present).
    pub fn reduce_cavity(&self) -> Vec<Complex64> {
        if !self.include_qubit {
            return self.matrix.clone();
        }
        let nf = self.dimension;
        let dim = 2 * nf;
        let mut out = vec![Complex64::ZERO; nf * nf];
        for q in 0..2 {
            for i in 0..nf {
                for j in 0..nf {
                    out[i * nf + j] += self.matrix[(q * nf + i) * dim + (q * nf + j)];
                }
            }
        }
        out
    }

    /// Expectation of the cavity annihilation operator.
    pub fn mean_field(&self) -> Complex64 {
        let red = self.reduce_cavity();
        let nf = self.dimension;
        let mut m = Complex64::ZERO;
        for k in 1..nf {
            // <a> = sum_k sqrt(k) rho_{k, k-1}
            m += (k as f64).sqrt() * red[k * nf + (k - 1)];
        }
        m
    }

    pub fn mean_photons(&self) -> f64 {
        let red = self.reduce_cavity();
        let nf = self.dimension;
        (0..nf).map(|k| k as f64 * red[k * nf + k].re).sum()
    }

    /// Qubit projection; +1 when no live qubit is present.
    pub fn mean_sigma_z(&self) -> f64 {
        if !self.include_qubit {
            return 1.0;
        }
        let nf = self.dimension;
        let dim = 2 * nf;
        let mut z = 0.0;
        for k in 0..nf {
            z += self.matrix[k * dim + k].re;
            z -= self.matrix[(nf + k) * dim + (nf + k)].re;
        }
        z
    }

    /// Enforce the state contract: unit trace, Hermitian, positive within
    /// floor, negligible boundary occupation.
    pub fn validate(&self) -> Result<(), QuantumError> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(QuantumError::Invalid(format!(
                "trace {tr} deviates from one"
            )));
        }
        if self.hermiticity_error() > 1e-10 {
            return Err(QuantumError::Invalid("matrix is not Hermitian".into()));
        }
        let min = hermitian_eigenvalues_min(&self.matrix, self.dim());
        if min < -1e-8 {
            return Err(QuantumError::Invalid(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        let occ = self.boundary_occupation();
        if occ > 1e-6 {
            return Err(QuantumError::TruncationBreach {
                occupation: occ,
                limit: 1e-6,
            });
        }
        Ok(())
    }
}

/// Smallest eigenvalue of a Hermitian matrix given as a row-major complex
/// buffer. Uses the real doubling [[A, -B], [B, A]] of H = A + iB.
fn hermitian_eigenvalues_min(m: &[Complex64], dim: usize) -> f64 {
    let mut big = nalgebra::DMatrix::<f64>::zeros(2 * dim, 2 * dim);
    for i in 0..dim {
        for j in 0..dim {
            let v = m[i * dim + j];
            big[(i, j)] = v.re;
            big[(i, j + dim)] = -v.im;
            big[(i + dim, j)] = v.im;
            big[(i + dim, j + dim)] = v.re;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(big);
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Lindblad generator in structured form. `h` holds the banded Hamiltonian as
/// triplets; the decay channels are applied as shift/block maps.
pub struct Generator {
    pub n_f: usize,
    pub include_qubit: bool,
    dim: usize,
    h: Vec<(usize, usize, Complex64)>,
    /// Diagonal of (1/2) sum_L L^dag L (real).
    half_decay: Vec<f64>,
    kappa: f64,
    purcell: f64,
}

/// Assemble the generator for a readout scenario and a qubit treatment.
/// Purcell decay requires the tensored qubit; a fixed projection cannot flip.
pub fn build_generator(
    scenario: &ReadoutScenario,
    qubit: QubitCoupling,
    n_f: usize,
) -> Result<Generator, QuantumError> {
    scenario.validate()?;
    if n_f < 8 {
        return Err(QuantumError::CutoffTooSmall(n_f));
    }
    if let QubitCoupling::Fixed(s) = qubit {
        if s != 1.0 && s != -1.0 {
            return Err(QuantumError::Invalid(format!(
                "fixed qubit projection must be +1 or -1, got {s}"
            )));
        }
        if scenario.purcell_rate() > 0.0 {
            return Err(QuantumError::Invalid(
                "Purcell decay needs the tensored qubit".into(),
            ));
        }
    }

    let include_qubit = matches!(qubit, QubitCoupling::Tensored);
    let dim = if include_qubit { 2 * n_f } else { n_f };
    let drive = Complex64::from_polar(scenario.drive_amplitude, scenario.drive_phase);
    let mut h = Vec::new();

    let sectors: &[(usize, f64)] = match qubit {
        QubitCoupling::Fixed(s) => {
            if s > 0.0 {
                &[(0, 1.0)]
            } else {
                &[(0, -1.0)]
            }
        }
        QubitCoupling::Tensored => &[(0, 1.0), (1, -1.0)],
    };
    for &(q, sz) in sectors {
        let base = q * n_f;
        for k in 0..n_f {
            let kerr_sign = match scenario.mechanism {
                Mechanism::Idc => sz,
                _ => 1.0,
            };
            let diag = scenario.chi_z * sz * k as f64
                + scenario.kerr * kerr_sign * (k as f64) * (k as f64 - 1.0);
            if diag != 0.0 {
                h.push((base + k, base + k, Complex64::new(diag, 0.0)));
            }
            if k + 1 < n_f {
                let amp = (k as f64 + 1.0).sqrt();
                // i eps e^{i theta_d} a^dag - i eps e^{-i theta_d} a
                h.push((base + k + 1, base + k, Complex64::I * drive * amp));
                h.push((base + k, base + k + 1, -Complex64::I * drive.conj() * amp));
            }
        }
    }

    let purcell = scenario.purcell_rate();
    let mut half_decay = vec![0.0; dim];
    for q in 0..if include_qubit { 2 } else { 1 } {
        for k in 0..n_f {
            half_decay[q * n_f + k] = 0.5 * scenario.kappa * k as f64;
        }
    }
    if include_qubit && purcell > 0.0 {
        // sigma_-^dag sigma_- projects onto the excited sector.
        for item in half_decay.iter_mut().take(n_f) {
            *item += 0.5 * purcell;
        }
    }

    Ok(Generator {
        n_f,
        include_qubit,
        dim,
        h,
        half_decay,
        kappa: scenario.kappa,
        purcell,
    })
}

impl Generator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn state_len(&self) -> usize {
        2 * self.dim * self.dim
    }

    /// `out = L(rho)` on interleaved re/im buffers of length `2 dim^2`.
    pub fn apply(&self, rho: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let nf = self.n_f;
        out.fill(0.0);

        // -i [H, rho]: for each triplet (r, c, v): -i v rho[c, :] into row r,
        // +i rho[:, r] v into column c.
        for &(r, c, v) in &self.h {
            let miv = Complex64::new(v.im, -v.re); // -i v
            let piv = Complex64::new(-v.im, v.re); // +i v
            let row_c = c * d;
            let row_r = r * d;
            for j in 0..d {
                let re = rho[2 * (row_c + j)];
                let im = rho[2 * (row_c + j) + 1];
                out[2 * (row_r + j)] += miv.re * re - miv.im * im;
                out[2 * (row_r + j) + 1] += miv.re * im + miv.im * re;
            }
            for i in 0..d {
                let re = rho[2 * (i * d + r)];
                let im = rho[2 * (i * d + r) + 1];
                out[2 * (i * d + c)] += piv.re * re - piv.im * im;
                out[2 * (i * d + c) + 1] += piv.re * im + piv.im * re;
            }
        }

        // kappa a rho a^dag: block-local Fock shift (i, j) <- (i+1, j+1).
        let sectors = if self.include_qubit { 2 } else { 1 };
        for qi in 0..sectors {
            for qj in 0..sectors {
                for i in 0..nf - 1 {
                    let gi = qi * nf + i;
                    for j in 0..nf - 1 {
                        let gj = qj * nf + j;
                        let w = self.kappa * ((i + 1) as f64 * (j + 1) as f64).sqrt();
                        let src = 2 * ((gi + 1) * d + (gj + 1));
                        out[2 * (gi * d + gj)] += w * rho[src];
                        out[2 * (gi * d + gj) + 1] += w * rho[src + 1];
                    }
                }
            }
        }

        // Gamma_p sigma_- rho sigma_+: copy the excited block onto the ground block.
        if self.purcell > 0.0 {
            for i in 0..nf {
                for j in 0..nf {
                    let src = 2 * (i * d + j);
                    let dst = 2 * ((nf + i) * d + (nf + j));
                    out[dst] += self.purcell * rho[src];
                    out[dst + 1] += self.purcell * rho[src + 1];
                }
            }
        }

        // -(1/2) {sum L^dag L, rho}: diagonal damping.
        for i in 0..d {
            for j in 0..d {
                let w = self.half_decay[i] + self.half_decay[j];
                out[2 * (i * d + j)] -= w * rho[2 * (i * d + j)];
                out[2 * (i * d + j) + 1] -= w * rho[2 * (i * d + j) + 1];
            }
        }
    }

    /// Trace of `a * X` for an interleaved buffer: sum_k sqrt(k) X[k, k-1],
    /// block-local in the qubit sectors.
    fn trace_a(&self, x: &[f64]) -> Complex64 {
        let d = self.dim;
        let nf = self.n_f;
        let mut m = Complex64::ZERO;
        let sectors = if self.include_qubit { 2 } else { 1 };
        for q in 0..sectors {
            for k in 1..nf {
                let idx = 2 * ((q * nf + k) * d + (q * nf + k - 1));
                m += (k as f64).sqrt() * Complex64::new(x[idx], x[idx + 1]);
            }
        }
        m
    }

    /// Trace of `a^dag * X`: sum_k sqrt(k) X[k-1, k].
    fn trace_adag(&self, x: &[f64]) -> Complex64 {
        let d = self.dim;
        let nf = self.n_f;
        let mut m = Complex64::ZERO;
        let sectors = if self.include_qubit { 2 } else { 1 };
        for q in 0..sectors {
            for k in 1..nf {
                let idx = 2 * ((q * nf + k - 1) * d + (q * nf + k));
                m += (k as f64).sqrt() * Complex64::new(x[idx], x[idx + 1]);
            }
        }
        m
    }

    /// `out = a * X` (left multiply), block-local.
    fn a_left(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let nf = self.n_f;
        out.fill(0.0);
        let sectors = if self.include_qubit { 2 } else { 1 };
        for q in 0..sectors {
            for i in 0..nf - 1 {
                let gi = q * nf + i;
                let w = ((i + 1) as f64).sqrt();
                for j in 0..d {
                    out[2 * (gi * d + j)] = w * x[2 * ((gi + 1) * d + j)];
                    out[2 * (gi * d + j) + 1] = w * x[2 * ((gi + 1) * d + j) + 1];
                }
            }
        }
    }

    /// `out = a^dag * X` (left multiply), block-local.
    fn adag_left(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let nf = self.n_f;
        out.fill(0.0);
        let sectors = if self.include_qubit { 2 } else { 1 };
        for q in 0..sectors {
            for i in 1..nf {
                let gi = q * nf + i;
                let w = (i as f64).sqrt();
                for j in 0..d {
                    out[2 * (gi * d + j)] = w * x[2 * ((gi - 1) * d + j)];
                    out[2 * (gi * d + j) + 1] = w * x[2 * ((gi - 1) * d + j) + 1];
                }
            }
        }
    }
}

fn state_to_buffer(state: &DensityState) -> Vec<f64> {
    let mut buf = Vec::with_capacity(2 * state.matrix.len());
    for v in &state.matrix {
        buf.push(v.re);
        buf.push(v.im);
    }
    buf
}

fn buffer_to_state(buf: &[f64], template: &DensityState, time: f64) -> DensityState {
    let matrix = buf
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect();
    DensityState {
        dimension: template.dimension,
        include_qubit: template.include_qubit,
        matrix,
        time,
    }
}

/// Evolve a state under the generator, reporting on a uniform grid of spacing
/// at most `dt`. Truncation is monitored at every output time.
pub fn evolve(
    state: &DensityState,
    generator: &Generator,
    t_max: f64,
    dt: f64,
) -> Result<Vec<DensityState>, QuantumError> {
    if state.dim() != generator.dim() {
        return Err(QuantumError::Invalid(format!(
            "state dimension {} does not match generator {}",
            state.dim(),
            generator.dim()
        )));
    }
    if !(t_max > 0.0 && dt > 0.0) {
        return Err(QuantumError::Invalid(
            "horizon and spacing must be positive".into(),
        ));
    }
    let n_steps = (t_max / dt).ceil().max(1.0) as usize;
    let step = t_max / n_steps as f64;
    let grid: Vec<f64> = (0..=n_steps).map(|i| i as f64 * step).collect();

    let y0 = state_to_buffer(state);
    let solver = Rk45 {
        rtol: 1e-9,
        atol: 1e-11,
    };
    let rows = solver
        .integrate_grid(
            |_t, y, dy| generator.apply(y, dy),
            &y0,
            &grid,
        )
        .map_err(|f| QuantumError::StepCollapse { t: f.t })?;

    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let st = buffer_to_state(row, state, state.time + grid[i]);
        let occ = st.boundary_occupation();
        if occ > 1e-4 {
            return Err(QuantumError::TruncationBreach {
                occupation: occ,
                limit: 1e-4,
            });
        }
        out.push(st);
    }
    Ok(out)
}

/// Regular phase-space lattice for Wigner rendering.
#[derive(Debug, Clone, Copy)]
pub struct WignerGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nx: usize,
    pub np: usize,
}

impl WignerGrid {
    pub fn centered(half_width: f64, n: usize) -> Self {
        WignerGrid {
            x_min: -half_width,
            x_max: half_width,
            p_min: -half_width,
            p_max: half_width,
            nx: n,
            np: n,
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        linspace(self.x_min, self.x_max, self.nx)
    }

    pub fn ps(&self) -> Vec<f64> {
        linspace(self.p_min, self.p_max, self.np)
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Wigner function W(x, p) on a lattice; `values[ix][ip]`.
#[derive(Debug, Clone)]
pub struct WignerMap {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl WignerMap {
    /// Trapezoid integral over the lattice; 1 on an adequate grid.
    pub fn normalization(&self) -> f64 {
        let mut total = 0.0;
        for (ix, row) in self.values.iter().enumerate() {
            let wx = trapezoid_weight(&self.xs, ix);
            for (ip, v) in row.iter().enumerate() {
                total += wx * trapezoid_weight(&self.ps, ip) * v;
            }
        }
        total
    }

    /// Momentum-integrated marginal, one value per x node.
    pub fn x_marginal(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(ip, v)| trapezoid_weight(&self.ps, ip) * v)
                    .sum()
            })
            .collect()
    }
}

fn trapezoid_weight(grid: &[f64], i: usize) -> f64 {
    let n = grid.len();
    if i == 0 {
        (grid[1] - grid[0]) / 2.0
    } else if i == n - 1 {
        (grid[n - 1] - grid[n - 2]) / 2.0
    } else {
        (grid[i + 1] - grid[i - 1]) / 2.0
    }
}

/// Wigner transform of the cavity-reduced state, with quadratures
/// `x = (a + a^dag)/sqrt(2)`, `p = i(a^dag - a)/sqrt(2)`; vacuum peaks at
/// `1/pi`. Fails with `GridTooCoarse` when the lattice cannot hold the state.
pub fn wigner(state: &DensityState, grid: &WignerGrid) -> Result<WignerMap, QuantumError> {
    let rho = state.reduce_cavity();
    let nf = state.dimension;
    let xs = grid.xs();
    let ps = grid.ps();
    let mut values = vec![vec![0.0; ps.len()]; xs.len()];

    // Series over Fock matrix elements: with beta = (x + ip)/sqrt(2) and
    // B = 4|beta|^2,
    //   W = (1/pi) e^{-B/2} sum_{k>=0} sum_n (-1)^n L_n^{(k)}(B)
    //       * [k = 0: rho_nn; k > 0: 2 Re(rho_{n+k, n} c_{n,k})],
    //   c_{n,k} = (2 conj(beta))^k sqrt(n!/(n+k)!).
    let mut lag_prev = vec![0.0; nf];
    let mut lag_curr = vec![0.0; nf];
    for (ix, &x) in xs.iter().enumerate() {
        for (ip, &p) in ps.iter().enumerate() {
            let beta = Complex64::new(x, p) / std::f64::consts::SQRT_2;
            let b = 4.0 * beta.norm_sqr();
            let envelope = (-b / 2.0).exp() / std::f64::consts::PI;
            if envelope == 0.0 {
                continue;
            }
            let mut total = 0.0;
            for k in 0..nf {
                // Forward recurrence in n for L_n^{(k)}(b).
                let mut coeff = Complex64::ONE;
                if k > 0 {
                    for m in 1..=k {
                        coeff *= 2.0 * beta.conj() / (m as f64).sqrt();
                    }
                }
                let mut acc = Complex64::ZERO;
                for n in 0..nf - k {
                    let lag = if n == 0 {
                        lag_curr[0] = 1.0;
                        1.0
                    } else if n == 1 {
                        lag_prev[0] = 1.0;
                        lag_curr[0] = 1.0 + k as f64 - b;
                        lag_curr[0]
                    } else {
                        let next = ((2.0 * (n as f64 - 1.0) + 1.0 + k as f64 - b) * lag_curr[0]
                            - (n as f64 - 1.0 + k as f64) * lag_prev[0])
                            / n as f64;
                        lag_prev[0] = lag_curr[0];
                        lag_curr[0] = next;
                        next
                    };
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    let elem = rho[(n + k) * nf + n];
                    if k == 0 {
                        acc += sign * lag * elem;
                    } else {
                        acc += sign * lag * 2.0 * (elem * coeff).re;
                    }
                    if n + k + 1 < nf && k > 0 {
                        coeff *= (n as f64 + 1.0).sqrt() / (n as f64 + 1.0 + k as f64).sqrt();
                    }
                }
                total += acc.re;
            }
            values[ix][ip] = envelope * total;
        }
    }

    let map = WignerMap { xs, ps, values };
    let missing = (map.normalization() - 1.0).abs();
    if missing > 1e-2 {
        return Err(QuantumError::GridTooCoarse { missing });
    }
    Ok(map)
}

/// Position-quadrature probability density of the cavity-reduced state,
/// evaluated with Hermite functions. The Wigner x-marginal must match this.
pub fn position_density(state: &DensityState, xs: &[f64]) -> Vec<f64> {
    let rho = state.reduce_cavity();
    let nf = state.dimension;
    xs.iter()
        .map(|&x| {
            // psi_0 = pi^{-1/4} e^{-x^2/2}; psi_{n+1} uses the stable two-term
            // recurrence.
            let mut psi = Vec::with_capacity(nf);
            let psi0 = (-x * x / 2.0).exp() / std::f64::consts::PI.powf(0.25);
            psi.push(psi0);
            if nf > 1 {
                psi.push(std::f64::consts::SQRT_2 * x * psi0);
            }
            for n in 1..nf - 1 {
                let nf64 = n as f64;
                let next = ((2.0 / (nf64 + 1.0)).sqrt() * x * psi[n]
                    - (nf64 / (nf64 + 1.0)).sqrt() * psi[n - 1]) as f64;
                psi.push(next);
            }
            let mut dens = 0.0;
            for m in 0..nf {
                for n in 0..nf {
                    dens += (rho[m * nf + n] * psi[m] * psi[n]).re;
                }
            }
            dens
        })
        .collect()
}

/// Measurement-noise curve from the quantum regression theorem.
///
/// `M_N^2(tau) = 2 kappa tau + kappa^2 * Int Int N(t, t') dt dt'`, where `N`
/// is the normally-ordered connected two-time correlation of the measured
/// output quadrature (local-oscillator angle from the scenario). The vacuum
/// term is exact; the excess vanishes identically for coherent-state (linear)
/// dynamics and is what the Kerr terms and Purcell flips add on top.
pub fn quantum_measurement_noise(
    scenario: &ReadoutScenario,
    tau_grid: &[f64],
    n_f: usize,
) -> Result<Vec<f64>, QuantumError> {
    if tau_grid.len() < 2 || tau_grid[0] != 0.0 {
        return Err(QuantumError::Invalid(
            "tau grid must start at zero and hold at least two points".into(),
        ));
    }
    if tau_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(QuantumError::Invalid("tau grid must increase".into()));
    }
    let qubit = if scenario.purcell_rate() > 0.0 {
        QubitCoupling::Tensored
    } else {
        QubitCoupling::Fixed(scenario.sigma_z_initial)
    };
    let generator = build_generator(scenario, qubit, n_f)?;
    let state0 = match qubit {
        QubitCoupling::Tensored => DensityState::vacuum(n_f, Some(QubitCoupling::Tensored)),
        QubitCoupling::Fixed(_) => DensityState::vacuum(n_f, None),
    };

    let solver = Rk45 {
        rtol: 1e-8,
        atol: 1e-10,
    };
    let n = tau_grid.len();
    let len = generator.state_len();

    // Pass 1: rho(t) on the grid, mean field alongside.
    let rows = solver
        .integrate_grid(
            |_t, y, dy| generator.apply(y, dy),
            &state_to_buffer(&state0),
            tau_grid,
        )
        .map_err(|f| QuantumError::StepCollapse { t: f.t })?;
    let mut alphas = Vec::with_capacity(n);
    for row in &rows {
        let st = buffer_to_state(row, &state0, 0.0);
        let occ = st.boundary_occupation();
        if occ > 1e-4 {
            return Err(QuantumError::TruncationBreach {
                occupation: occ,
                limit: 1e-4,
            });
        }
        alphas.push(st.mean_field());
    }

    // Pass 2: for every start index, propagate the seeds a rho and a^dag rho
    // jointly and record the three raw correlators at later grid times.
    let mut t_aa = vec![vec![Complex64::ZERO; n]; n]; // <a(t) a(t')>
    let mut t_na = vec![vec![Complex64::ZERO; n]; n]; // <a^dag(t) a(t')>
    let mut t_dd = vec![vec![Complex64::ZERO; n]; n]; // <a^dag(t) a^dag(t')>
    let mut seed = vec![0.0; 2 * len];
    for k in 0..n - 1 {
        generator.a_left(&rows[k], &mut seed[..len]);
        generator.adag_left(&rows[k], &mut seed[len..]);
        t_aa[k][k] = generator.trace_a(&seed[..len]);
        t_na[k][k] = generator.trace_adag(&seed[..len]);
        t_dd[k][k] = generator.trace_adag(&seed[len..]);
        let sub = &tau_grid[k..];
        let rows_fwd = solver
            .integrate_grid(
                |_t, y, dy| {
                    let (ya, yb) = y.split_at(len);
                    let (da, db) = dy.split_at_mut(len);
                    generator.apply(ya, da);
                    generator.apply(yb, db);
                },
                &seed,
                sub,
            )
            .map_err(|f| QuantumError::StepCollapse { t: f.t })?;
        for (off, row) in rows_fwd.iter().enumerate().skip(1) {
            let j = k + off;
            t_aa[j][k] = generator.trace_a(&row[..len]);
            t_na[j][k] = generator.trace_adag(&row[..len]);
            t_dd[j][k] = generator.trace_adag(&row[len..]);
        }
    }
    let last = n - 1;
    generator.a_left(&rows[last], &mut seed[..len]);
    generator.adag_left(&rows[last], &mut seed[len..]);
    t_aa[last][last] = generator.trace_a(&seed[..len]);
    t_na[last][last] = generator.trace_adag(&seed[..len]);
    t_dd[last][last] = generator.trace_adag(&seed[len..]);

    // Assemble the symmetric real integrand on t >= t'.
    let lo2 = Complex64::from_polar(1.0, -2.0 * scenario.homodyne_angle);
    let mut integrand = vec![vec![0.0; n]; n];
    for j in 0..n {
        for k in 0..=j {
            let prod_aa = alphas[j] * alphas[k];
            let aa_left = t_aa[j][k] - prod_aa;
            // <a(t') a(t)> from the dagger-covariant propagation of a^dag rho.
            let aa_right = t_dd[j][k].conj() - prod_aa;
            let na = t_na[j][k] - alphas[j].conj() * alphas[k];
            let val = (lo2 * 0.5 * (aa_left + aa_right)).re * 2.0 + 2.0 * na.re;
            integrand[j][k] = val;
            integrand[k][j] = val;
        }
    }

    // Cumulative double trapezoid per requested tau.
    let mut out = Vec::with_capacity(n);
    for m in 0..n {
        if m == 0 {
            out.push(0.0);
            continue;
        }
        let sub = &tau_grid[..=m];
        let mut q = 0.0;
        for j in 0..=m {
            let wj = trapezoid_weight(sub, j);
            for k in 0..=m {
                q += wj * trapezoid_weight(sub, k) * integrand[j][k];
            }
        }
        let m2 = 2.0 * scenario.kappa * tau_grid[m] + scenario.kappa * scenario.kappa * q;
        out.push(m2.max(0.0).sqrt());
    }
    Ok(out)
}

/// Frobenius norm of `[H, sigma_z]` for the effective readout Hamiltonian of a
/// mechanism. Both dispersive forms are diagonal in sigma_z, so the norm
/// vanishes; the transverse Rabi term is the contrast case.
pub fn qnd_commutator_check(mechanism: Mechanism, n_f: usize) -> f64 {
    let chi = 1.0;
    let kerr = -0.05;
    let scenario = match mechanism {
        Mechanism::Ideal => ReadoutScenario::ideal(chi, 2.0, 0.7),
        Mechanism::Idc => {
            let mut s = ReadoutScenario::idc(chi, kerr, 2.0, 0.7, 0.1);
            s.purcell_enabled = false;
            s
        }
        Mechanism::Npdc => ReadoutScenario::npdc(chi, kerr, 2.0, 0.7),
    };
    let generator =
        build_generator(&scenario, QubitCoupling::Tensored, n_f.max(8)).expect("valid scenario");
    commutator_with_sigma_z(&generator.h, generator.dim, generator.n_f)
}

/// Frobenius norm of `[g_x (a + a^dag) sigma_x, sigma_z]`; strictly positive
/// for any `g_x > 0`.
pub fn transverse_commutator_norm(g_x: f64, n_f: usize) -> f64 {
    let dim = 2 * n_f;
    let mut h = Vec::new();
    // sigma_x swaps the qubit sectors; (a + a^dag) is the usual tridiagonal.
    for (qa, qb) in [(0usize, 1usize), (1, 0)] {
        for k in 0..n_f {
            if k + 1 < n_f {
                let amp = Complex64::new(g_x * ((k + 1) as f64).sqrt(), 0.0);
                h.push((qa * n_f + k + 1, qb * n_f + k, amp));
                h.push((qa * n_f + k, qb * n_f + k + 1, amp));
            }
        }
    }
    commutator_with_sigma_z(&h, dim, n_f)
}

fn commutator_with_sigma_z(
    h: &[(usize, usize, Complex64)],
    _dim: usize,
    n_f: usize,
) -> f64 {
    let sz = |idx: usize| if idx < n_f { 1.0 } else { -1.0 };
    // [H, sigma_z]_{rc} = H_{rc} (sz(c) - sz(r)); Frobenius norm of the result.
    let mut acc = 0.0;
    for &(r, c, v) in h {
        let w = v * (sz(c) - sz(r));
        acc += w.norm_sqr();
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::ang_mhz;
    use crate::readout::ideal_cavity_amplitude;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn desk_scenario(mechanism: Mechanism) -> ReadoutScenario {
        let kappa = ang_mhz(16.0);
        let chi = kappa / 2.0;
        let kerr = -0.05 * kappa;
        let eps = kappa * (6.0_f64).sqrt() / 2.0; // steady n about 3
        match mechanism {
            Mechanism::Ideal => ReadoutScenario::ideal(chi, kappa, eps),
            Mechanism::Idc => ReadoutScenario::idc(chi, kerr, kappa, eps, 0.25),
            Mechanism::Npdc => ReadoutScenario::npdc(chi, kerr, kappa, eps),
        }
    }

    fn random_density(n_f: usize, rng: &mut ChaCha8Rng) -> DensityState {
        // Random positive matrix: G G^dag normalized.
        let dim = n_f;
        let g: Vec<Complex64> = (0..dim * dim)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut m = vec![Complex64::ZERO; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let mut acc = Complex64::ZERO;
                for k in 0..dim {
                    acc += g[i * dim + k] * g[j * dim + k].conj();
                }
                m[i * dim + j] = acc;
            }
        }
        let tr: f64 = (0..dim).map(|i| m[i * dim + i].re).sum();
        for v in m.iter_mut() {
            *v /= tr;
        }
        DensityState {
            dimension: n_f,
            include_qubit: false,
            matrix: m,
            time: 0.0,
        }
    }

    #[test]
    fn generator_preserves_trace_and_hermiticity() {
        // Order-one rates keep the absolute round-off floor meaningful.
        let mut rng = ChaCha8Rng::seed_from_u64(0x71a);
        for mech in [Mechanism::Ideal, Mechanism::Idc, Mechanism::Npdc] {
            let mut s = match mech {
                Mechanism::Ideal => ReadoutScenario::ideal(0.5, 1.0, 0.7),
                Mechanism::Idc => ReadoutScenario::idc(0.5, -0.05, 1.0, 0.7, 0.25),
                Mechanism::Npdc => ReadoutScenario::npdc(0.5, -0.05, 1.0, 0.7),
            };
            s.purcell_enabled = false;
            let gen = build_generator(&s, QubitCoupling::Fixed(1.0), 12).unwrap();
            let rho = random_density(12, &mut rng);
            let buf = state_to_buffer(&rho);
            let mut out = vec![0.0; buf.len()];
            gen.apply(&buf, &mut out);
            let d = gen.dim();
            let tr: f64 = (0..d).map(|i| out[2 * (i * d + i)]).sum();
            assert!(tr.abs() < 1e-12, "trace leak {tr:.2e} for {mech:?}");
            // L(rho) of Hermitian rho is Hermitian.
            for i in 0..d {
                for j in 0..d {
                    let ij = Complex64::new(out[2 * (i * d + j)], out[2 * (i * d + j) + 1]);
                    let ji = Complex64::new(out[2 * (j * d + i)], out[2 * (j * d + i) + 1]);
                    assert!((ij - ji.conj()).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cutoff_guard() {
        let s = desk_scenario(Mechanism::Ideal);
        assert!(matches!(
            build_generator(&s, QubitCoupling::Fixed(1.0), 4),
            Err(QuantumError::CutoffTooSmall(4))
        ));
        let idc = desk_scenario(Mechanism::Idc);
        assert!(build_generator(&idc, QubitCoupling::Fixed(1.0), 12).is_err());
        assert!(build_generator(&idc, QubitCoupling::Tensored, 12).is_ok());
    }

    #[test]
    fn undriven_vacuum_is_stationary() {
        let mut s = desk_scenario(Mechanism::Npdc);
        s.drive_amplitude = 0.0;
        let gen = build_generator(&s, QubitCoupling::Fixed(1.0), 10).unwrap();
        let v = DensityState::vacuum(10, None);
        let states = evolve(&v, &gen, 5.0 / s.kappa, 0.05 / s.kappa).unwrap();
        let last = states.last().unwrap();
        assert!((last.matrix[0].re - 1.0).abs() < 1e-12);
        assert!(last.mean_photons().abs() < 1e-12);
    }

    #[test]
    fn linear_mean_field_tracks_the_closed_form() {
        let kappa = ang_mhz(16.0);
        let mut s = ReadoutScenario::ideal(kappa / 2.0, kappa, kappa / 2.0);
        s.drive_phase = 0.31;
        for sz in [1.0, -1.0] {
            let gen = build_generator(&s, QubitCoupling::Fixed(sz), 20).unwrap();
            let v = DensityState::vacuum(20, None);
            let states = evolve(&v, &gen, 8.0 / kappa, 0.05 / kappa).unwrap();
            for st in states.iter().step_by(20) {
                let expect = ideal_cavity_amplitude(&s, sz, st.time);
                assert!(
                    (st.mean_field() - expect).norm() < 1e-6,
                    "mean field drifted at t = {}",
                    st.time
                );
            }
            // Driven-from-vacuum linear evolution stays a pure coherent state.
            let final_state = states.last().unwrap();
            assert_abs_diff_eq!(final_state.purity(), 1.0, epsilon = 1e-6);
            final_state.validate().unwrap();
        }
    }

    #[test]
    fn kerr_makes_the_state_non_gaussian() {
        let s = desk_scenario(Mechanism::Npdc);
        let gen = build_generator(&s, QubitCoupling::Fixed(1.0), 36).unwrap();
        let v = DensityState::vacuum(36, None);
        let states = evolve(&v, &gen, 3.0 / s.kappa, 0.05 / s.kappa).unwrap();
        let purity = states.last().unwrap().purity();
        assert!(purity < 0.999, "kerr should mix the state, purity {purity}");
    }

    #[test]
    fn purcell_flips_the_tensored_qubit() {
        let s = desk_scenario(Mechanism::Idc);
        let gp = s.purcell_rate();
        assert!(gp > 0.0);
        let gen = build_generator(&s, QubitCoupling::Tensored, 30).unwrap();
        let v = DensityState::vacuum(30, Some(QubitCoupling::Tensored));
        let states = evolve(&v, &gen, 8.0 / s.kappa, 0.05 / s.kappa).unwrap();
        for st in states.iter().step_by(40) {
            let expect = 2.0 * (-gp * st.time).exp() - 1.0;
            assert!(
                (st.mean_sigma_z() - expect).abs() < 1e-6,
                "sigma_z decay off at t = {}",
                st.time
            );
        }
    }

    #[test]
    fn truncation_breach_is_reported() {
        let s = desk_scenario(Mechanism::Ideal);
        let gen = build_generator(&s, QubitCoupling::Fixed(1.0), 8).unwrap();
        let v = DensityState::vacuum(8, None);
        match evolve(&v, &gen, 8.0 / s.kappa, 0.05 / s.kappa) {
            Err(QuantumError::TruncationBreach { occupation, .. }) => {
                assert!(occupation > 1e-4);
            }
            other => panic!("expected truncation breach, got {:?}", other.map(|v| v.len())),
        }
    }

    #[test]
    fn wigner_vacuum_and_fock_one() {
        let v = DensityState::vacuum(12, None);
        let grid = WignerGrid::centered(4.5, 81);
        let map = wigner(&v, &grid).unwrap();
        let mid = 40;
        assert_abs_diff_eq!(
            map.values[mid][mid],
            1.0 / std::f64::consts::PI,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(map.normalization(), 1.0, epsilon = 1e-3);

        let mut amps = vec![Complex64::ZERO; 12];
        amps[1] = Complex64::ONE;
        let fock1 = DensityState::from_amplitudes(&amps);
        let map1 = wigner(&fock1, &grid).unwrap();
        assert_abs_diff_eq!(
            map1.values[mid][mid],
            -1.0 / std::f64::consts::PI,
            epsilon = 1e-12
        );
    }

    #[test]
    fn wigner_coherent_state_is_a_displaced_gaussian() {
        let beta = Complex64::new(1.1, -0.6);
        let st = DensityState::coherent(30, beta);
        let grid = WignerGrid {
            x_min: -3.0,
            x_max: 6.0,
            p_min: -6.0,
            p_max: 3.0,
            nx: 91,
            np: 91,
        };
        let map = wigner(&st, &grid).unwrap();
        assert_abs_diff_eq!(map.normalization(), 1.0, epsilon = 1e-3);
        // Peak sits at (x, p) = sqrt(2) (Re, Im) beta with height 1/pi.
        let (mut bx, mut bp, mut bv) = (0, 0, f64::MIN);
        for ix in 0..map.xs.len() {
            for ip in 0..map.ps.len() {
                if map.values[ix][ip] > bv {
                    bv = map.values[ix][ip];
                    bx = ix;
                    bp = ip;
                }
            }
        }
        let dx = map.xs[1] - map.xs[0];
        assert!((map.xs[bx] - std::f64::consts::SQRT_2 * beta.re).abs() <= dx);
        assert!((map.ps[bp] - std::f64::consts::SQRT_2 * beta.im).abs() <= dx);
        assert!((bv - 1.0 / std::f64::consts::PI).abs() < 2e-3);

        // Pointwise against the closed form away from the peak too.
        for (ix, &x) in map.xs.iter().enumerate().step_by(13) {
            for (ip, &p) in map.ps.iter().enumerate().step_by(13) {
                let b = Complex64::new(x, p) / std::f64::consts::SQRT_2;
                let exact = (1.0 / std::f64::consts::PI) * (-2.0 * (b - beta).norm_sqr()).exp();
                assert_abs_diff_eq!(map.values[ix][ip], exact, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn wigner_marginal_matches_the_position_density() {
        // A deliberately lopsided superposition.
        let mut amps = vec![Complex64::ZERO; 24];
        amps[0] = Complex64::new(0.8, 0.0);
        amps[2] = Complex64::new(0.4, 0.3);
        amps[5] = Complex64::new(-0.2, 0.25);
        let st = DensityState::from_amplitudes(&amps);
        let grid = WignerGrid::centered(6.0, 161);
        let map = wigner(&st, &grid).unwrap();
        let marginal = map.x_marginal();
        let direct = position_density(&st, &map.xs);
        for (a, b) in marginal.iter().zip(direct.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-3);
        }
    }

    #[test]
    fn wigner_rejects_a_grid_that_clips_the_state() {
        let st = DensityState::coherent(40, Complex64::new(2.4, 0.0));
        let grid = WignerGrid::centered(1.5, 41);
        assert!(matches!(
            wigner(&st, &grid),
            Err(QuantumError::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn ideal_noise_is_vacuum_noise() {
        let s = desk_scenario(Mechanism::Ideal);
        let kappa = s.kappa;
        let grid: Vec<f64> = (0..=25).map(|i| i as f64 * 0.4 / kappa).collect();
        let noise = quantum_measurement_noise(&s, &grid, 26).unwrap();
        assert_eq!(noise[0], 0.0);
        for (i, &mn) in noise.iter().enumerate().skip(2) {
            let expect = (2.0 * kappa * grid[i]).sqrt();
            assert!(
                (mn / expect - 1.0).abs() < 0.02,
                "ideal noise off vacuum at kt = {}: {} vs {}",
                kappa * grid[i],
                mn,
                expect
            );
        }
    }

    #[test]
    fn noise_ordering_ideal_npdc_idc() {
        let kappa = desk_scenario(Mechanism::Ideal).kappa;
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5 / kappa).collect();
        let ideal = quantum_measurement_noise(&desk_scenario(Mechanism::Ideal), &grid, 26).unwrap();
        let npdc = quantum_measurement_noise(&desk_scenario(Mechanism::Npdc), &grid, 26).unwrap();
        let idc = quantum_measurement_noise(&desk_scenario(Mechanism::Idc), &grid, 26).unwrap();
        let last = grid.len() - 1;
        assert!(
            npdc[last] > ideal[last] && idc[last] > npdc[last],
            "expected ideal < npdc < idc at kt = 10: {} / {} / {}",
            ideal[last],
            npdc[last],
            idc[last]
        );
    }

    #[test]
    fn qnd_commutators() {
        for mech in [Mechanism::Ideal, Mechanism::Idc, Mechanism::Npdc] {
            let norm = qnd_commutator_check(mech, 8);
            assert!(norm < 1e-12, "{mech:?} should be QND, got {norm:.2e}");
        }
        let n1 = transverse_commutator_norm(1.0, 8);
        let n2 = transverse_commutator_norm(2.0, 8);
        assert!(n1 > 0.0);
        assert_abs_diff_eq!(n2 / n1, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn validate_catches_broken_states() {
        let mut st = DensityState::vacuum(10, None);
        st.validate().unwrap();
        st.matrix[0] = Complex64::new(1.5, 0.0);
        assert!(st.validate().is_err());

        let mut st = DensityState::vacuum(10, None);
        st.matrix[1] = Complex64::new(0.2, 0.1); // not Hermitian
        assert!(st.validate().is_err());

        let mut st = DensityState::vacuum(10, None);
        // Shift weight onto the boundary level, keeping the trace exact.
        let dim = 10;
        st.matrix[0] = Complex64::new(1.0 - 1e-4, 0.0);
        st.matrix[(dim - 1) * dim + (dim - 1)] = Complex64::new(1e-4, 0.0);
        assert!(matches!(
            st.validate(),
            Err(QuantumError::TruncationBreach { .. })
        ));
    }
}
