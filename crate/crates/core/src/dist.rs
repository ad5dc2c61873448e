//! Null and alternate distributions, their likelihood ratio, expectations and
//! the clipping-region masses used by every downstream construction.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

use crate::error::{Error, Result};
use crate::quad::{self, Estimate, QuadConfig};

/// A point mass of a finite-support distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub point: f64,
    pub prob: f64,
}

/// A user-supplied continuous density on the real line.
pub trait ContinuousDensity: Send + Sync + fmt::Debug {
    fn pdf(&self, x: f64) -> f64;

    fn ln_pdf(&self, x: f64) -> f64 {
        self.pdf(x).ln()
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64;

    /// Support of the density; either end may be infinite.
    fn support(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Bounded interval that carries essentially all of the mass. Quadrature
    /// subdivides it directly and maps whatever lies outside.
    fn core_interval(&self) -> (f64, f64);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub sd: f64,
}

impl ContinuousDensity for Gaussian {
    fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd;
        -0.5 * z * z - self.sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        Normal::new(self.mean, self.sd).expect("validated at construction").sample(rng)
    }

    fn core_interval(&self) -> (f64, f64) {
        (self.mean - 8.0 * self.sd, self.mean + 8.0 * self.sd)
    }
}

#[derive(Debug, Clone)]
pub enum Continuous {
    Gaussian(Gaussian),
    Custom(Arc<dyn ContinuousDensity>),
}

impl Continuous {
    fn density(&self) -> &dyn ContinuousDensity {
        match self {
            Continuous::Gaussian(g) => g,
            Continuous::Custom(c) => c.as_ref(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum DistKind {
    /// Atoms sorted by point, all with positive probability.
    Finite(Vec<Atom>),
    Continuous(Continuous),
}

#[derive(Debug, Clone)]
pub struct SimpleDistribution {
    label: String,
    kind: DistKind,
}

impl SimpleDistribution {
    /// Finite-support distribution. Zero-probability atoms are dropped and
    /// repeated points are merged.
    pub fn finite(label: impl Into<String>, atoms: Vec<Atom>) -> Result<Self> {
        let mut total = 0.0;
        for a in &atoms {
            if !a.point.is_finite() || !a.prob.is_finite() || a.prob < 0.0 {
                return Err(Error::InvalidDistribution(format!("bad atom {a:?}")));
            }
            total += a.prob;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}, not 1")));
        }
        let mut atoms: Vec<Atom> = atoms.into_iter().filter(|a| a.prob > 0.0).collect();
        atoms.sort_by(|a, b| a.point.total_cmp(&b.point));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if last.point == a.point => last.prob += a.prob,
                _ => merged.push(a),
            }
        }
        Ok(SimpleDistribution { label: label.into(), kind: DistKind::Finite(merged) })
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidDistribution(format!("bernoulli p = {p} outside [0, 1]")));
        }
        Self::finite(
            format!("bernoulli(p={p})"),
            vec![Atom { point: 0.0, prob: 1.0 - p }, Atom { point: 1.0, prob: p }],
        )
    }

    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        if !mean.is_finite() || !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::InvalidDistribution(format!("gaussian mean={mean} sd={sd}")));
        }
        Ok(SimpleDistribution {
            label: format!("gaussian(mu={mean},sigma={sd})"),
            kind: DistKind::Continuous(Continuous::Gaussian(Gaussian { mean, sd })),
        })
    }

    pub fn custom(label: impl Into<String>, density: Arc<dyn ContinuousDensity>) -> Self {
        SimpleDistribution { label: label.into(), kind: DistKind::Continuous(Continuous::Custom(density)) }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> &DistKind {
        &self.kind
    }

    pub fn atoms(&self) -> Option<&[Atom]> {
        match &self.kind {
            DistKind::Finite(a) => Some(a),
            DistKind::Continuous(_) => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.kind, DistKind::Finite(_))
    }

    /// Probability mass (finite support) or density (continuous) at `x`.
    pub fn density(&self, x: f64) -> f64 {
        match &self.kind {
            DistKind::Finite(atoms) => atoms
                .binary_search_by(|a| a.point.total_cmp(&x))
                .map(|i| atoms[i].prob)
                .unwrap_or(0.0),
            DistKind::Continuous(c) => c.density().pdf(x),
        }
    }

    pub fn ln_density(&self, x: f64) -> f64 {
        match &self.kind {
            DistKind::Finite(_) => self.density(x).ln(),
            DistKind::Continuous(c) => c.density().ln_pdf(x),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            DistKind::Finite(atoms) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.prob;
                    if u < acc {
                        return a.point;
                    }
                }
                atoms.last().expect("nonempty").point
            }
            DistKind::Continuous(c) => {
                let mut dyn_rng = DynRng(rng);
                c.density().sample(&mut dyn_rng)
            }
        }
    }

    /// `E[f(X)]`. Exact for finite support; adaptive quadrature otherwise.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> Result<Estimate> {
        self.expect_with(f, &QuadConfig::default())
    }

    pub fn expect_with<F: Fn(f64) -> f64>(&self, f: F, cfg: &QuadConfig) -> Result<Estimate> {
        match &self.kind {
            DistKind::Finite(atoms) => {
                let value = atoms.iter().map(|a| a.prob * f(a.point)).sum();
                Ok(Estimate { value, error: 0.0 })
            }
            DistKind::Continuous(c) => {
                let d = c.density();
                let (a, b) = d.support();
                let integrand = |x: f64| {
                    let p = d.pdf(x);
                    if p == 0.0 { 0.0 } else { p * f(x) }
                };
                quad::integrate(&integrand, a, b, d.core_interval(), cfg)
            }
        }
    }

    fn same_as(&self, other: &SimpleDistribution) -> bool {
        match (&self.kind, &other.kind) {
            (DistKind::Finite(a), DistKind::Finite(b)) => a == b,
            (DistKind::Continuous(Continuous::Gaussian(a)), DistKind::Continuous(Continuous::Gaussian(b))) => a == b,
            (DistKind::Continuous(Continuous::Custom(a)), DistKind::Continuous(Continuous::Custom(b))) => {
                Arc::ptr_eq(a, b)
            }
            _ => false,
        }
    }
}

struct DynRng<'a, R: Rng + ?Sized>(&'a mut R);

impl<R: Rng + ?Sized> RngCore for DynRng<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// `E_dist[f]`, see [`SimpleDistribution::expect`].
pub fn expect_under<F: Fn(f64) -> f64>(dist: &SimpleDistribution, f: F) -> Result<Estimate> {
    dist.expect(f)
}

/// Law of the log-likelihood ratio `ln(q/p)(X)` under each hypothesis.
///
/// Supplying this for a continuous pair lets region masses be computed from
/// closed-form CDFs instead of quadrature over indicator functions.
pub trait LlrLaw: Send + Sync + fmt::Debug {
    /// `P(ln LR(X) <= t)` for `X ~ null`.
    fn null_cdf(&self, t: f64) -> f64;
    /// `Q(ln LR(X) <= t)` for `X ~ alt`.
    fn alt_cdf(&self, t: f64) -> f64;
}

/// Equal-variance Gaussian mean shift with `d = |mu1 - mu0| / sigma > 0`.
/// The log-likelihood ratio is `N(-d²/2, d²)` under the null and
/// `N(d²/2, d²)` under the alternate.
#[derive(Debug, Clone)]
pub struct GaussianShiftLlr {
    null: StatNormal,
    alt: StatNormal,
}

impl GaussianShiftLlr {
    pub fn new(d: f64) -> Result<Self> {
        let d = d.abs();
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidParameter(format!("mean shift d = {d} must be positive")));
        }
        let null = StatNormal::new(-0.5 * d * d, d).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let alt = StatNormal::new(0.5 * d * d, d).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(GaussianShiftLlr { null, alt })
    }
}

impl LlrLaw for GaussianShiftLlr {
    fn null_cdf(&self, t: f64) -> f64 {
        self.null.cdf(t)
    }
    fn alt_cdf(&self, t: f64) -> f64 {
        self.alt.cdf(t)
    }
}

/// Masses of the clipping regions `A = {q < c1 p}`, `B = {q > c2 p}` and
/// `M` (the rest) under both hypotheses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionMasses {
    pub null_a: f64,
    pub null_m: f64,
    pub null_b: f64,
    pub alt_a: f64,
    pub alt_m: f64,
    pub alt_b: f64,
}

#[derive(Debug, Clone)]
pub struct TestingPair {
    null: SimpleDistribution,
    alt: SimpleDistribution,
    /// Union of the atoms' points for finite pairs.
    support: Option<Vec<f64>>,
    llr_law: Option<Arc<dyn LlrLaw>>,
    identical: bool,
}

impl TestingPair {
    pub fn new(null: SimpleDistribution, alt: SimpleDistribution) -> Result<Self> {
        let identical = null.same_as(&alt);
        match (&null.kind, &alt.kind) {
            (DistKind::Finite(p_atoms), DistKind::Finite(q_atoms)) => {
                for q in q_atoms {
                    if null.density(q.point) == 0.0 {
                        return Err(Error::ZeroNullDensity { x: q.point, alt_density: q.prob });
                    }
                }
                let mut support: Vec<f64> = p_atoms.iter().chain(q_atoms).map(|a| a.point).collect();
                support.sort_by(f64::total_cmp);
                support.dedup();
                Ok(TestingPair { null, alt, support: Some(support), llr_law: None, identical })
            }
            (DistKind::Continuous(pc), DistKind::Continuous(qc)) => {
                let llr_law: Option<Arc<dyn LlrLaw>> = match (pc, qc) {
                    (Continuous::Gaussian(p), Continuous::Gaussian(q)) if p.sd == q.sd && p.mean != q.mean => {
                        Some(Arc::new(GaussianShiftLlr::new((q.mean - p.mean) / p.sd)?))
                    }
                    _ => None,
                };
                let pair = TestingPair { null, alt, support: None, llr_law, identical };
                pair.check_continuity_on_grid()?;
                Ok(pair)
            }
            _ => Err(Error::InvalidDistribution(
                "mixed finite/continuous pairs are not supported".into(),
            )),
        }
    }

    /// Installs a closed-form law of the log-likelihood ratio.
    pub fn with_llr_law(mut self, law: Arc<dyn LlrLaw>) -> Self {
        self.llr_law = Some(law);
        self
    }

    pub fn null(&self) -> &SimpleDistribution {
        &self.null
    }

    pub fn alt(&self) -> &SimpleDistribution {
        &self.alt
    }

    /// The pair with hypotheses exchanged.
    pub fn swapped(&self) -> Result<TestingPair> {
        TestingPair::new(self.alt.clone(), self.null.clone())
    }

    pub fn is_finite(&self) -> bool {
        self.support.is_some()
    }

    /// Points with positive mass under either hypothesis (finite pairs only).
    pub fn support_points(&self) -> Option<&[f64]> {
        self.support.as_deref()
    }

    /// True when `P = Q` (structurally, or atom by atom).
    pub fn is_identical(&self) -> bool {
        self.identical
    }

    pub fn llr_law(&self) -> Option<&Arc<dyn LlrLaw>> {
        self.llr_law.as_ref()
    }

    fn check_continuity_on_grid(&self) -> Result<()> {
        let (lo, hi) = match &self.alt.kind {
            DistKind::Continuous(c) => c.density().core_interval(),
            DistKind::Finite(_) => return Ok(()),
        };
        for i in 0..=1000 {
            let x = lo + (hi - lo) * i as f64 / 1000.0;
            let q = self.alt.density(x);
            if q > 0.0 && self.null.density(x) == 0.0 && self.null.ln_density(x) == f64::NEG_INFINITY {
                return Err(Error::ZeroNullDensity { x, alt_density: q });
            }
        }
        Ok(())
    }

    /// `q(x) / p(x)`.
    pub fn likelihood_ratio(&self, x: f64) -> Result<f64> {
        Ok(self.ln_likelihood_ratio(x)?.exp())
    }

    /// `ln q(x) - ln p(x)`, computed in log space for continuous pairs.
    pub fn ln_likelihood_ratio(&self, x: f64) -> Result<f64> {
        if self.identical {
            return Ok(0.0);
        }
        let ln_p = self.null.ln_density(x);
        let ln_q = self.alt.ln_density(x);
        if ln_p == f64::NEG_INFINITY {
            return Err(Error::ZeroNullDensity { x, alt_density: ln_q.exp() });
        }
        Ok(ln_q - ln_p)
    }

    /// Region masses for clip levels `0 < c1 <= c2`. Boundary ties belong to `M`.
    pub fn region_masses(&self, c1: f64, c2: f64) -> Result<RegionMasses> {
        if !(c1 > 0.0 && c1 <= c2) {
            return Err(Error::InvalidParameter(format!("need 0 < c1 <= c2, got c1={c1}, c2={c2}")));
        }
        if self.identical {
            let inside = c1 <= 1.0 && 1.0 <= c2;
            let (a, m, b) = if inside {
                (0.0, 1.0, 0.0)
            } else if 1.0 < c1 {
                (1.0, 0.0, 0.0)
            } else {
                (0.0, 0.0, 1.0)
            };
            return Ok(RegionMasses { null_a: a, null_m: m, null_b: b, alt_a: a, alt_m: m, alt_b: b });
        }
        if let Some(points) = &self.support {
            let mut r = RegionMasses { null_a: 0.0, null_m: 0.0, null_b: 0.0, alt_a: 0.0, alt_m: 0.0, alt_b: 0.0 };
            for &x in points {
                let p = self.null.density(x);
                let q = self.alt.density(x);
                if q < c1 * p {
                    r.null_a += p;
                    r.alt_a += q;
                } else if q > c2 * p {
                    r.null_b += p;
                    r.alt_b += q;
                } else {
                    r.null_m += p;
                    r.alt_m += q;
                }
            }
            return Ok(r);
        }
        let (l1, l2) = (c1.ln(), c2.ln());
        if let Some(law) = &self.llr_law {
            let null_a = law.null_cdf(l1);
            let null_b = 1.0 - law.null_cdf(l2);
            let alt_a = law.alt_cdf(l1);
            let alt_b = 1.0 - law.alt_cdf(l2);
            return Ok(RegionMasses {
                null_a,
                null_m: 1.0 - null_a - null_b,
                null_b,
                alt_a,
                alt_m: 1.0 - alt_a - alt_b,
                alt_b,
            });
        }
        let region = |x: f64| -> i8 {
            match self.ln_likelihood_ratio(x) {
                Ok(l) if l < l1 => -1,
                Ok(l) if l > l2 => 1,
                _ => 0,
            }
        };
        let null_a = self.null.expect(|x| (region(x) == -1) as u8 as f64)?.value;
        let null_b = self.null.expect(|x| (region(x) == 1) as u8 as f64)?.value;
        let alt_a = self.alt.expect(|x| (region(x) == -1) as u8 as f64)?.value;
        let alt_b = self.alt.expect(|x| (region(x) == 1) as u8 as f64)?.value;
        Ok(RegionMasses { null_a, null_m: 1.0 - null_a - null_b, null_b, alt_a, alt_m: 1.0 - alt_a - alt_b, alt_b })
    }
}

/// Free-function form of [`TestingPair::likelihood_ratio`].
pub fn likelihood_ratio(pair: &TestingPair, x: f64) -> Result<f64> {
    pair.likelihood_ratio(x)
}

/// Free-function form of [`TestingPair::region_masses`], returning
/// `(P(A), P(B), Q(M))`.
pub fn region_masses(pair: &TestingPair, c1: f64, c2: f64) -> Result<(f64, f64, f64)> {
    let r = pair.region_masses(c1, c2)?;
    Ok((r.null_a, r.null_b, r.alt_m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bern_pair(p: f64, q: f64) -> TestingPair {
        TestingPair::new(SimpleDistribution::bernoulli(p).unwrap(), SimpleDistribution::bernoulli(q).unwrap())
            .unwrap()
    }

    #[test]
    fn bernoulli_likelihood_ratio() {
        let pair = bern_pair(0.3, 0.7);
        assert!((pair.likelihood_ratio(1.0).unwrap() - 0.7 / 0.3).abs() < 1e-14);
        assert!((pair.likelihood_ratio(0.0).unwrap() - 0.3 / 0.7).abs() < 1e-14);
    }

    #[test]
    fn identical_pair_has_unit_ratio() {
        let pair = bern_pair(0.4, 0.4);
        assert_eq!(pair.likelihood_ratio(1.0).unwrap(), 1.0);
        let g = TestingPair::new(
            SimpleDistribution::gaussian(0.0, 1.0).unwrap(),
            SimpleDistribution::gaussian(0.0, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(g.likelihood_ratio(3.7).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_midpoint_ratio_is_one() {
        let pair = TestingPair::new(
            SimpleDistribution::gaussian(0.0, 1.0).unwrap(),
            SimpleDistribution::gaussian(1.0, 1.0).unwrap(),
        )
        .unwrap();
        assert!((pair.likelihood_ratio(0.5).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_null_density_is_rejected() {
        let p = SimpleDistribution::bernoulli(0.0).unwrap();
        let q = SimpleDistribution::bernoulli(0.5).unwrap();
        assert!(matches!(TestingPair::new(p, q), Err(Error::ZeroNullDensity { .. })));
        let pair = bern_pair(0.3, 0.7);
        assert!(matches!(pair.likelihood_ratio(2.0), Err(Error::ZeroNullDensity { .. })));
    }

    #[test]
    fn mixed_pair_is_rejected() {
        let r = TestingPair::new(SimpleDistribution::bernoulli(0.5).unwrap(), SimpleDistribution::gaussian(0.0, 1.0).unwrap());
        assert!(matches!(r, Err(Error::InvalidDistribution(_))));
    }

    #[test]
    fn finite_validation() {
        let bad = SimpleDistribution::finite("x", vec![Atom { point: 0.0, prob: 0.5 }, Atom { point: 1.0, prob: 0.4 }]);
        assert!(bad.is_err());
        let neg = SimpleDistribution::finite("x", vec![Atom { point: 0.0, prob: 1.5 }, Atom { point: 1.0, prob: -0.5 }]);
        assert!(neg.is_err());
        let merged = SimpleDistribution::finite(
            "x",
            vec![Atom { point: 1.0, prob: 0.25 }, Atom { point: 0.0, prob: 0.0 }, Atom { point: 1.0, prob: 0.75 }],
        )
        .unwrap();
        assert_eq!(merged.atoms().unwrap(), &[Atom { point: 1.0, prob: 1.0 }]);
    }

    #[test]
    fn expectations() {
        let b = SimpleDistribution::bernoulli(0.3).unwrap();
        assert!((b.expect(|x| x).unwrap().value - 0.3).abs() < 1e-15);
        assert!((b.expect(|_| 1.0).unwrap().value - 1.0).abs() < 1e-15);
        let pair = bern_pair(0.3, 0.7);
        let v = b.expect(|x| pair.likelihood_ratio(x).unwrap().ln()).unwrap().value;
        // Two-atom sum by hand.
        let oracle = 0.3 * (7.0f64 / 3.0).ln() + 0.7 * (3.0f64 / 7.0).ln();
        assert!((v - oracle).abs() < 1e-15);
        assert!(v < 0.0);
        let g = SimpleDistribution::gaussian(2.0, 0.5).unwrap();
        let est = g.expect(|_| 1.0).unwrap();
        assert!((est.value - 1.0).abs() < 1e-10);
        let m = g.expect(|x| x).unwrap();
        assert!((m.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn bernoulli_region_masses() {
        let pair = bern_pair(0.3, 0.7);
        let (pa, pb, qm) = region_masses(&pair, 0.5, 2.0).unwrap();
        assert!((pa - 0.7).abs() < 1e-15);
        assert!((pb - 0.3).abs() < 1e-15);
        assert_eq!(qm, 0.0);
        let same = bern_pair(0.3, 0.3);
        assert_eq!(region_masses(&same, 0.5, 2.0).unwrap(), (0.0, 0.0, 1.0));
        assert_eq!(region_masses(&same, 1.0, 1.0).unwrap(), (0.0, 0.0, 1.0));
        assert!(pair.region_masses(2.0, 1.0).is_err());
    }

    #[test]
    fn gaussian_masses_closed_form_match_quadrature() {
        let p = SimpleDistribution::gaussian(0.0, 1.0).unwrap();
        let q = SimpleDistribution::gaussian(1.0, 1.0).unwrap();
        let closed = TestingPair::new(p.clone(), q.clone()).unwrap();
        assert!(closed.llr_law().is_some());
        let mut generic = closed.clone();
        generic.llr_law = None;
        let a = closed.region_masses(0.6, 1.8).unwrap();
        let b = generic.region_masses(0.6, 1.8).unwrap();
        for (x, y) in [(a.null_a, b.null_a), (a.null_b, b.null_b), (a.alt_m, b.alt_m), (a.alt_a, b.alt_a)] {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn sampling_matches_masses() {
        let d = SimpleDistribution::bernoulli(0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let ones = (0..n).filter(|_| d.sample(&mut rng) == 1.0).count() as f64 / n as f64;
        assert!((ones - 0.3).abs() < 0.005);
        let g = SimpleDistribution::gaussian(1.0, 2.0).unwrap();
        let mean = (0..n).map(|_| g.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.03);
    }
}
