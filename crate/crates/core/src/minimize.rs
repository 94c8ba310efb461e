//! Bracketed scalar minimization.
//!
//! Used by the centralized ML oracle: a coarse grid scan locates the basin,
//! golden-section search shrinks the bracket, and a sign bisection on the
//! derivative polishes the minimizer below the `sqrt(eps)` floor that any
//! comparison-only method hits on a flat minimum.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Result of a golden-section search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub x_min: f64,
    pub f_min: f64,
    pub evals: usize,
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
///
/// Stops once the bracket width drops below `tol` or after `max_evals`
/// function evaluations.
pub fn golden_section(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_evals: usize,
) -> Bracket {
    debug_assert!(lo < hi);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut evals = 2;

    while hi - lo > tol && evals < max_evals {
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
        evals += 1;
    }

    let (x_min, f_min) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    Bracket {
        lo,
        hi,
        x_min,
        f_min,
        evals,
    }
}

/// Bisection on the sign of `df` inside `[lo, hi]`, assuming `df(lo) <= 0 <= df(hi)`.
///
/// Returns the midpoint of the final interval; iterates until the interval
/// cannot be split any further in floating point.
pub fn bisect_derivative(df: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if df(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Indices of strict-or-plateau local minima of a sampled sequence.
pub fn grid_local_minima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    (0..n)
        .filter(|&k| {
            let left = k == 0 || values[k] <= values[k - 1];
            let right = k + 1 == n || values[k] < values[k + 1];
            left && right
        })
        .collect()
}
