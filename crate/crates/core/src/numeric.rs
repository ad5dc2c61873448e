//! Scalar root finding and one-dimensional maximisation.

use crate::error::{Error, Result};

/// Expands `[lo, hi]` geometrically until `g(lo) <= 0 <= g(hi)`.
///
/// `g` is assumed to be nondecreasing in the sense that the sign pattern is
/// `-` on the left and `+` on the right; no stronger monotonicity is used.
pub fn expand_bracket<G>(g: &G, mut lo: f64, mut hi: f64, limit: f64) -> Result<(f64, f64)>
where
    G: Fn(f64) -> f64,
{
    let mut width = (hi - lo).max(1e-3);
    let mut g_lo = g(lo);
    let mut g_hi = g(hi);
    while g_lo > 0.0 || g_hi < 0.0 {
        if lo < -limit || hi > limit || !g_lo.is_finite() && !g_hi.is_finite() {
            return Err(Error::NoRootInBracket { lo, hi, f_lo: g_lo, f_hi: g_hi });
        }
        width *= 2.0;
        if g_lo > 0.0 {
            hi = lo;
            g_hi = g_lo;
            lo -= width;
            g_lo = g(lo);
        } else {
            lo = hi;
            g_lo = g_hi;
            hi += width;
            g_hi = g(hi);
        }
    }
    Ok((lo, hi))
}

/// Bisection for `g(x) = 0` on a bracket with `g(lo) <= 0 <= g(hi)`.
///
/// Stops when `|g| <= tol` or the bracket can no longer be split.
pub fn bisect<G>(g: &G, mut lo: f64, mut hi: f64, tol: f64) -> f64
where
    G: Fn(f64) -> f64,
{
    let mut best = (f64::INFINITY, 0.5 * (lo + hi));
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if v.abs() < best.0 {
            best = (v.abs(), mid);
        }
        if v.abs() <= tol {
            return mid;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best.1
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
///
/// Returns `(argmax, max)`. The interval is shrunk until its width is below
/// `tol`; the best point evaluated along the way is returned.
pub fn golden_section_max<F>(f: &F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0;
    while hi - lo > tol && iters < 500 {
        iters += 1;
        // NaN compares false and pushes the search away from that side.
        if f1 >= f2 || f2.is_nan() {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let candidates = [(x1, f1), (x2, f2), (lo, f(lo)), (hi, f(hi))];
    candidates
        .into_iter()
        .filter(|(_, v)| !v.is_nan())
        .fold((x1, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_then_bisect_cube_root() {
        let g = |x: f64| x * x * x - 10.0;
        let (lo, hi) = expand_bracket(&g, 0.0, 1.0, 1e6).unwrap();
        assert!(g(lo) <= 0.0 && g(hi) >= 0.0);
        let r = bisect(&g, lo, hi, 1e-13);
        assert!((r - 10f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn bracket_expands_left() {
        let g = |x: f64| x + 50.0;
        let (lo, hi) = expand_bracket(&g, 0.0, 1.0, 1e6).unwrap();
        assert!(lo <= -50.0 && hi >= -50.0);
    }

    #[test]
    fn bracket_reports_failure() {
        let g = |_x: f64| 1.0;
        match expand_bracket(&g, 0.0, 1.0, 100.0) {
            Err(Error::NoRootInBracket { f_lo, .. }) => assert_eq!(f_lo, 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let f = |x: f64| -(x - 0.3) * (x - 0.3) + 2.0;
        let (x, v) = golden_section_max(&f, -4.0, 5.0, 1e-10);
        // The peak is flat to rounding within ~1e-8 of 0.3.
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn golden_handles_boundary_maximum() {
        let f = |x: f64| x;
        let (x, _) = golden_section_max(&f, 0.0, 1.0, 1e-12);
        assert!(x > 1.0 - 1e-10);
    }
}
