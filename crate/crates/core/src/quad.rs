//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Finite intervals are subdivided directly. Half-infinite tails are mapped to
//! `[0, 1)` with `x = a - ln(1 - u)` (resp. `x = b + ln(1 - u)`), which turns an
//! integrand with at least exponential decay into a bounded one.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Integral estimate with its error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { rel_tol: 1e-9, abs_tol: 1e-14, max_intervals: 4000 }
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * h;
    let err = ((kronrod - gauss) * h).abs();
    (value, err)
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate_finite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, cfg: &QuadConfig) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let (v, e) = gk15(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v, err: e });
    let mut total = v;
    let mut total_err = e;
    while total_err > cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
        if heap.len() >= cfg.max_intervals {
            return Err(Error::QuadratureNonConvergence {
                achieved: total_err,
                requested: cfg.abs_tol.max(cfg.rel_tol * total.abs()),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            return Err(Error::QuadratureNonConvergence {
                achieved: total_err,
                requested: cfg.abs_tol.max(cfg.rel_tol * total.abs()),
            });
        }
        let (v1, e1) = gk15(f, worst.a, mid);
        let (v2, e2) = gk15(f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Piece { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, err: e2 });
    }
    // Re-sum to shed accumulated cancellation from the running updates.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.err).sum();
    Ok(Estimate { value, error })
}

/// Integrates `f` over `[a, b]` where either end may be infinite.
///
/// `core` is the bounded interval holding most of the mass; it is clipped to
/// `[a, b]` and the remaining tails are integrated after the exponential map.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, core: (f64, f64), cfg: &QuadConfig) -> Result<Estimate> {
    let lo = core.0.max(a);
    let hi = core.1.min(b);
    let (lo, hi) = if lo < hi {
        (lo, hi)
    } else if a.is_finite() && b.is_finite() {
        (a, b)
    } else {
        let c = if a.is_finite() { a } else if b.is_finite() { b } else { 0.0 };
        (c, c)
    };
    let mut out = integrate_finite(f, lo, hi, cfg)?;
    if lo > a {
        let tail = if a.is_finite() {
            integrate_finite(f, a, lo, cfg)?
        } else {
            let g = |u: f64| {
                let w = 1.0 - u;
                let v = f(lo + w.ln());
                if v == 0.0 { 0.0 } else { v / w }
            };
            integrate_finite(&g, 0.0, 1.0, cfg)?
        };
        out.value += tail.value;
        out.error += tail.error;
    }
    if hi < b {
        let tail = if b.is_finite() {
            integrate_finite(f, hi, b, cfg)?
        } else {
            let g = |u: f64| {
                let w = 1.0 - u;
                let v = f(hi - w.ln());
                if v == 0.0 { 0.0 } else { v / w }
            };
            integrate_finite(&g, 0.0, 1.0, cfg)?
        };
        out.value += tail.value;
        out.error += tail.error;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let cfg = QuadConfig::default();
        let est = integrate_finite(&|x: f64| x.powi(5) - 2.0 * x, 0.0, 2.0, &cfg).unwrap();
        assert!((est.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn kink_converges() {
        let cfg = QuadConfig::default();
        let est = integrate_finite(&|x: f64| (x - 0.3).abs(), 0.0, 1.0, &cfg).unwrap();
        let exact = 0.5 * 0.09 + 0.5 * 0.49;
        assert!((est.value - exact).abs() < 1e-10, "{}", est.value - exact);
    }

    #[test]
    fn gaussian_over_real_line() {
        let cfg = QuadConfig::default();
        let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let est = integrate(&pdf, f64::NEG_INFINITY, f64::INFINITY, (-8.0, 8.0), &cfg).unwrap();
        assert!((est.value - 1.0).abs() < 1e-12);
        let second = integrate(&|x: f64| x * x * pdf(x), f64::NEG_INFINITY, f64::INFINITY, (-8.0, 8.0), &cfg)
            .unwrap();
        assert!((second.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn exponential_half_line() {
        let cfg = QuadConfig::default();
        let est = integrate(&|x: f64| (-x).exp(), 0.0, f64::INFINITY, (0.0, 5.0), &cfg).unwrap();
        assert!((est.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn divergent_budget_reports() {
        let cfg = QuadConfig { rel_tol: 1e-15, abs_tol: 0.0, max_intervals: 10 };
        let r = integrate_finite(&|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &cfg);
        assert!(matches!(r, Err(Error::QuadratureNonConvergence { .. })));
    }
}
