//! Embedded Dormand-Prince 5(4) integrator with output on a caller-fixed grid.
//!
//! Steps are clamped to land exactly on each requested output time, so results
//! are bitwise reproducible for a given right-hand side and tolerance.

/// Integration failure: the error controller pushed the step below the floor.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFailure {
    pub t: f64,
    pub step: f64,
}

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const MAX_STEPS: usize = 50_000_000;

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Fifth-order weights equal the last A row (FSAL); fourth-order embedded below.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive integrator; `rtol`/`atol` bound the embedded per-step error.
#[derive(Debug, Clone, Copy)]
pub struct Rk45 {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Rk45 {
    fn default() -> Self {
        Rk45 {
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

impl Rk45 {
    /// Integrate `y' = rhs(t, y)` from `grid[0]`, returning the state at every
    /// grid time (the first row is `y0`). `grid` must be strictly increasing.
    pub fn integrate_grid(
        &self,
        mut rhs: impl FnMut(f64, &[f64], &mut [f64]),
        y0: &[f64],
        grid: &[f64],
    ) -> Result<Vec<Vec<f64>>, StepFailure> {
        assert!(grid.len() >= 2, "need at least two grid times");
        let dim = y0.len();
        let mut out = Vec::with_capacity(grid.len());
        out.push(y0.to_vec());

        let mut y = y0.to_vec();
        let mut t = grid[0];
        let span = grid[grid.len() - 1] - grid[0];
        let h_floor = span * 1e-14;
        let mut h = span * 1e-6;

        let mut k = vec![vec![0.0; dim]; 7];
        let mut y_stage = vec![0.0; dim];
        let mut y5 = vec![0.0; dim];
        rhs(t, &y, &mut k[0]);
        let mut have_k0 = true;

        let mut next = 1;
        let mut steps = 0usize;
        while next < grid.len() {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(StepFailure { t, step: h });
            }
            let t_target = grid[next];
            // Clamp to land exactly on the grid time; the controller's natural
            // step `h` survives the clamp so short landing steps cannot starve
            // the proposal for the next interval.
            let remaining = t_target - t;
            let clamped = h >= remaining;
            let h_try = if clamped { remaining } else { h };
            if !have_k0 {
                rhs(t, &y, &mut k[0]);
                have_k0 = true;
            }
            for s in 1..7 {
                for i in 0..dim {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    y_stage[i] = y[i] + h_try * acc;
                }
                let (head, tail) = k.split_at_mut(s);
                let _ = head;
                rhs(t + C[s] * h_try, &y_stage, &mut tail[0]);
            }
            // k[6] is the derivative at the fifth-order solution (FSAL).
            for i in 0..dim {
                let mut acc5 = 0.0;
                for (j, kj) in k.iter().enumerate().take(6) {
                    acc5 += A[6][j] * kj[i];
                }
                y5[i] = y[i] + h_try * acc5;
            }
            let mut err: f64 = 0.0;
            for i in 0..dim {
                let mut acc4 = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    acc4 += B4[j] * kj[i];
                }
                let y4 = y[i] + h_try * acc4;
                let scale = self.atol + self.rtol * y[i].abs().max(y5[i].abs());
                let e = (y5[i] - y4) / scale;
                err += e * e;
            }
            err = (err / dim as f64).sqrt();

            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            if err <= 1.0 {
                y.copy_from_slice(&y5);
                k.swap(0, 6);
                if clamped {
                    t = t_target;
                    out.push(y.clone());
                    next += 1;
                    // Error came from a shortened step; keep the natural one.
                } else {
                    t += h_try;
                    h = (h_try * factor).min(span);
                }
            } else {
                have_k0 = true; // k[0] still valid at unchanged (t, y)
                h = (h_try * factor).min(span);
                if h < h_floor {
                    return Err(StepFailure { t, step: h });
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let sol = Rk45::default()
            .integrate_grid(|_, y, dy| dy[0] = -0.7 * y[0], &[2.0], &grid)
            .unwrap();
        for (i, row) in sol.iter().enumerate() {
            let exact = 2.0 * (-0.7 * grid[i]).exp();
            assert!((row[0] - exact).abs() < 1e-9, "t={} err={}", grid[i], row[0] - exact);
        }
    }

    #[test]
    fn harmonic_oscillator_energy_conserved() {
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        let sol = Rk45::default()
            .integrate_grid(
                |_, y, dy| {
                    dy[0] = y[1];
                    dy[1] = -y[0];
                },
                &[1.0, 0.0],
                &grid,
            )
            .unwrap();
        let last = sol.last().unwrap();
        let energy = last[0] * last[0] + last[1] * last[1];
        assert!((energy - 1.0).abs() < 1e-8);
        assert!((last[0] - grid.last().unwrap().cos()).abs() < 1e-8);
    }

    #[test]
    fn results_are_reproducible() {
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 * 0.2).collect();
        let run = || {
            Rk45::default()
                .integrate_grid(
                    |t, y, dy| {
                        dy[0] = (t * y[0]).sin() - 0.3 * y[0];
                        dy[1] = y[0] - y[1];
                    },
                    &[1.0, 0.0],
                    &grid,
                )
                .unwrap()
        };
        let (a, b) = (run(), run());
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra, rb);
        }
    }
}
