//! Differentially private SPRT baseline.
//!
//! Each arriving point is kept with probability `r`. Kept points add their
//! (clipped) log-likelihood ratio to `L`, and each kept point triggers one
//! AboveThreshold query per boundary: `L + Lap(4Δ/ε_side)` against a threshold
//! noised once with `Lap(2Δ/ε_side)`. Subsampling amplifies the inner budget, so
//! `ε_inner = ln(1 + (e^ε - 1)/r)` is split evenly over the two boundaries.
//! Thresholds are pushed outward by a union bound over the Laplace tails so
//! noise alone crosses a boundary with probability at most `α/2` (upper) or
//! `β/2` (lower).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::TestingPair;
use crate::eprocess::{Decision, InconclusiveReason, SequentialOutcome, SequentialTest};
use crate::error::{Error, Result};
use crate::noise::{self, NoiseMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpSprtConfig {
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    pub subsample_rate: f64,
    /// Log-likelihood ratios are clipped to `[-clip, clip]` when set.
    pub clip: Option<f64>,
    #[serde(skip)]
    pub noise: NoiseMode,
}

impl DpSprtConfig {
    /// `r = min(1, sqrt(ε/10))`, no clipping, Laplace noise.
    pub fn auto(epsilon: f64, alpha: f64, beta: f64) -> Self {
        DpSprtConfig {
            epsilon,
            alpha,
            beta,
            subsample_rate: auto_subsample_rate(epsilon),
            clip: None,
            noise: NoiseMode::Laplace,
        }
    }

    pub fn upper(&self) -> f64 {
        ((1.0 - self.beta) / self.alpha).ln()
    }

    pub fn lower(&self) -> f64 {
        (self.beta / (1.0 - self.alpha)).ln()
    }

    /// Budget per boundary after amplification by subsampling.
    pub fn side_budget(&self) -> f64 {
        let inner = ((self.epsilon.exp() - 1.0) / self.subsample_rate).ln_1p();
        // ln_1p of a huge argument overflows for very large ε; the outer ε is
        // then a valid (smaller) inner budget.
        inner.max(self.epsilon) / 2.0
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon = {} must be positive", self.epsilon)));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        if !(self.subsample_rate > 0.0 && self.subsample_rate <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "subsample rate {} must lie in (0, 1]",
                self.subsample_rate
            )));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameter(format!("clip = {c} must be positive")));
            }
        }
        Ok(())
    }
}

pub fn auto_subsample_rate(epsilon: f64) -> f64 {
    (epsilon / 10.0).sqrt().min(1.0)
}

#[derive(Debug, Clone)]
pub struct DpSprt {
    pair: TestingPair,
    config: DpSprtConfig,
    /// Range of a single (clipped) log-likelihood ratio.
    delta: f64,
}

impl DpSprt {
    pub fn new(pair: TestingPair, config: DpSprtConfig) -> Result<Self> {
        config.validate()?;
        let delta = match (config.clip, pair.support_points()) {
            (Some(c), None) => 2.0 * c,
            (clip, Some(points)) => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &x in points {
                    let v = clip_llr(llr_or_neg_inf(&pair, x), clip);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(Error::UnboundedLlr);
                }
                hi - lo
            }
            (None, None) => return Err(Error::UnboundedLlr),
        };
        Ok(DpSprt { pair, config, delta })
    }

    pub fn config(&self) -> &DpSprtConfig {
        &self.config
    }

    /// Sensitivity of the running sum to one record.
    pub fn sensitivity(&self) -> f64 {
        self.delta
    }

    pub fn llr(&self, x: f64) -> f64 {
        clip_llr(llr_or_neg_inf(&self.pair, x), self.config.clip)
    }

    /// Threshold and query noise scales.
    pub fn noise_scales(&self) -> (f64, f64) {
        let side = self.config.side_budget();
        (2.0 * self.delta / side, 4.0 * self.delta / side)
    }

    /// Outward shift of a boundary at the `k`-th query for failure budget
    /// `delta_total`, half spent on the threshold noise and half over queries.
    fn inflation(&self, k: u64, delta_total: f64) -> f64 {
        if self.config.noise == NoiseMode::Disabled || self.delta == 0.0 {
            return 0.0;
        }
        let (s_thr, s_q) = self.noise_scales();
        let half = delta_total / 2.0;
        let k = k as f64;
        s_thr * (1.0 / (2.0 * half)).ln() + s_q * (k * (k + 1.0) / (2.0 * half)).ln()
    }
}

fn llr_or_neg_inf(pair: &TestingPair, x: f64) -> f64 {
    let p = pair.null().density(x);
    let q = pair.alt().density(x);
    if p == 0.0 && q == 0.0 {
        return 0.0;
    }
    pair.ln_likelihood_ratio(x).unwrap_or(f64::INFINITY)
}

fn clip_llr(v: f64, clip: Option<f64>) -> f64 {
    match clip {
        Some(c) => v.clamp(-c, c),
        None => v,
    }
}

impl SequentialTest for DpSprt {
    fn name(&self) -> &'static str {
        "dpsprt"
    }

    fn run(&self, stream: &mut dyn Iterator<Item = f64>, max_n: u64, seed: u64) -> Result<SequentialOutcome> {
        let cfg = &self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s_thr, s_q) = self.noise_scales();
        let upper = cfg.upper() + noise::draw(&mut rng, s_thr, cfg.noise);
        let lower = cfg.lower() + noise::draw(&mut rng, s_thr, cfg.noise);
        let mut sum = 0.0;
        let mut queries = 0u64;
        let mut n = 0u64;
        while n < max_n {
            let Some(x) = stream.next() else { break };
            n += 1;
            if cfg.subsample_rate < 1.0 && !rng.random_bool(cfg.subsample_rate) {
                continue;
            }
            let v = self.llr(x);
            if !v.is_finite() {
                return Err(Error::UnboundedLlr);
            }
            sum += v;
            queries += 1;
            let over_up = sum + noise::draw(&mut rng, s_q, cfg.noise) - upper - self.inflation(queries, cfg.alpha / 2.0);
            let over_down =
                lower - self.inflation(queries, cfg.beta / 2.0) - (sum + noise::draw(&mut rng, s_q, cfg.noise));
            if over_up >= 0.0 || over_down >= 0.0 {
                let decision = if over_up >= over_down { Decision::AcceptQ } else { Decision::AcceptP };
                return Ok(SequentialOutcome { decision, stopping_time: n, log_e: None, reason: None });
            }
        }
        Ok(SequentialOutcome {
            decision: Decision::Inconclusive,
            stopping_time: n,
            log_e: None,
            reason: Some(InconclusiveReason::Horizon),
        })
    }
}

/// Runs the baseline on one stream.
pub fn run_dpsprt(
    pair: &TestingPair,
    config: DpSprtConfig,
    stream: &mut dyn Iterator<Item = f64>,
    max_n: u64,
    seed: u64,
) -> Result<SequentialOutcome> {
    DpSprt::new(pair.clone(), config)?.run(stream, max_n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::SimpleDistribution;

    fn bern_pair() -> TestingPair {
        TestingPair::new(SimpleDistribution::bernoulli(0.3).unwrap(), SimpleDistribution::bernoulli(0.7).unwrap())
            .unwrap()
    }

    #[test]
    fn auto_rate() {
        assert_eq!(auto_subsample_rate(10.0), 1.0);
        assert_eq!(auto_subsample_rate(40.0), 1.0);
        assert!((auto_subsample_rate(1.0) - 0.1f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn boundaries_have_opposite_signs() {
        let c = DpSprtConfig::auto(1.0, 0.025, 0.025);
        assert!(c.upper() > 0.0 && c.lower() < 0.0);
        assert!((c.upper() - 39f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sensitivity_is_llr_range() {
        let t = DpSprt::new(bern_pair(), DpSprtConfig::auto(1.0, 0.025, 0.025)).unwrap();
        assert!((t.sensitivity() - 2.0 * (7.0f64 / 3.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn unbounded_without_clip() {
        let pair = TestingPair::new(
            SimpleDistribution::gaussian(0.0, 1.0).unwrap(),
            SimpleDistribution::gaussian(1.0, 1.0).unwrap(),
        )
        .unwrap();
        assert!(matches!(DpSprt::new(pair.clone(), DpSprtConfig::auto(1.0, 0.1, 0.1)), Err(Error::UnboundedLlr)));
        let cfg = DpSprtConfig { clip: Some(2.0), ..DpSprtConfig::auto(1.0, 0.1, 0.1) };
        assert_eq!(DpSprt::new(pair, cfg).unwrap().sensitivity(), 4.0);
    }

    #[test]
    fn noiseless_all_ones_hits_upper() {
        let cfg = DpSprtConfig { subsample_rate: 1.0, noise: NoiseMode::Disabled, ..DpSprtConfig::auto(1.0, 0.025, 0.025) };
        let out = run_dpsprt(&bern_pair(), cfg, &mut std::iter::repeat(1.0), 1000, 0).unwrap();
        // ln(7/3) per step; ln 39 / ln(7/3) = 4.32.
        assert_eq!(out.decision, Decision::AcceptQ);
        assert_eq!(out.stopping_time, 5);
    }

    #[test]
    fn horizon_is_inconclusive() {
        let cfg = DpSprtConfig::auto(1.0, 0.025, 0.025);
        let out = run_dpsprt(&bern_pair(), cfg, &mut std::iter::repeat_n(0.0, 3), 1000, 0).unwrap();
        assert_eq!(out.decision, Decision::Inconclusive);
        assert_eq!(out.stopping_time, 3);
    }
}
