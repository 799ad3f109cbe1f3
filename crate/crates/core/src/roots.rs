//! Scalar root finding: bisection brackets refined by safeguarded Newton steps.

/// Root-finder failure: the bracket or iteration budget was exhausted.
#[derive(Debug, Clone, PartialEq)]
pub struct NoRoot {
    pub iterations: usize,
}

const MAX_ITER: usize = 200;

/// Root of `f` in `[a, b]` to relative tolerance `rtol` on the abscissa.
///
/// `f(a)` and `f(b)` must have opposite signs. Newton steps (finite-difference
/// slope) are taken when they stay inside the current bracket, otherwise the
/// method falls back to bisection, so convergence is guaranteed for continuous
/// `f`.
pub fn bracketed_root(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rtol: f64,
) -> Result<f64, NoRoot> {
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let (mut flo, mut fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(NoRoot { iterations: 0 });
    }
    let mut x = 0.5 * (lo + hi);
    let mut dx = hi - lo;
    for _ in 0..MAX_ITER {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        let scale = hi.abs().max(lo.abs());
        // Converged when either the bracket closes or the last step was tiny
        // (one-sided secant convergence leaves the far end untouched).
        if hi - lo <= rtol * scale || dx.abs() <= rtol * scale {
            return Ok(x);
        }
        // Secant candidate from the bracket endpoints; require it to stay
        // inside the bracket and to keep shrinking, else bisect.
        let slope = (fhi - flo) / (hi - lo);
        let newton = x - fx / slope;
        let step = newton - x;
        if slope.is_finite()
            && newton > lo
            && newton < hi
            && step.abs() < 0.5 * dx.abs() + rtol * scale
        {
            dx = step;
            x = newton;
        } else {
            dx = 0.5 * (hi - lo);
            x = lo + dx;
        }
    }
    Err(NoRoot {
        iterations: MAX_ITER,
    })
}

/// Minimum of a unimodal `f` on `[a, b]` by golden-section search.
///
/// Returns `(x_min, f(x_min))` after `max_evals` function evaluations.
pub fn golden_section_min(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    max_evals: usize,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..max_evals.saturating_sub(2) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Least-squares line `y = a*x + b`; returns `(a, b, r_squared)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(&u, &v)| (u - mx) * (v - my)).sum();
    let syy: f64 = y.iter().map(|&v| (v - my) * (v - my)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&u, &v)| {
            let r = v - (a * u + b);
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (a, b, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_transcendental_root() {
        // x tan x = 2 on (0, pi/2): x = 1.07687...
        let f = |x: f64| x * x.tan() - 2.0;
        let x = bracketed_root(f, 0.1, 1.5, 1e-14).unwrap();
        assert!((x * x.tan() - 2.0).abs() < 1e-12);
        assert!((x - 1.076_873_986_311_8).abs() < 1e-10);
    }

    #[test]
    fn rejects_unbracketed() {
        assert!(bracketed_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn golden_section_finds_parabola_min() {
        let (x, fx) = golden_section_min(|x| (x - 0.3) * (x - 0.3) + 1.0, -1.0, 1.0, 60);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((fx - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| 2.5 * v - 1.0).collect();
        let (a, b, r2) = linear_fit(&x, &y);
        assert!((a - 2.5).abs() < 1e-12);
        assert!((b + 1.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }
}
