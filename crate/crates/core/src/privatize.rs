//! Pure-DP batch e-values.
//!
//! A bounded e-variable `E` with values in `[lo, hi]` is mixed as
//! `Λ_n = Σ ln(1 - λ + λ E(x_t))`, which has per-point sensitivity
//! `R_λ = ln((1 - λ + λ hi) / (1 - λ + λ lo))`. Releasing
//! `Λ_n + Lap(b) + ln(1 - b²)` with `b = R_λ / ε < 1` is ε-DP and has
//! `E^P[exp(·)] <= 1`. `λ` maximises the e-power lower bound.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evar::BoundedEVariable;
use crate::noise::{self, NoiseMode};
use crate::numeric::{bisect, golden_section_max};

/// Per-sample e-power of the mixed statistic as a function of `λ`.
#[derive(Debug, Clone, PartialEq)]
pub enum PowerModel {
    /// Concavity bound `E^Q[ln(1 - λ + λE)] >= λ μ`.
    ConcavityBound { mu: f64 },
    /// Exact `E^Q[ln(1 - λ + λE)]` for a finite law of `E` under the alternate,
    /// given as `(probability, value)` pairs.
    Exact { law: Vec<(f64, f64)> },
}

impl PowerModel {
    pub fn per_sample(&self, lambda: f64) -> f64 {
        match self {
            PowerModel::ConcavityBound { mu } => lambda * mu,
            PowerModel::Exact { law } => law.iter().map(|&(w, e)| w * (lambda * (e - 1.0)).ln_1p()).sum(),
        }
    }

    /// `E^Q[ln E]`.
    pub fn mu(&self) -> f64 {
        match self {
            PowerModel::ConcavityBound { mu } => *mu,
            PowerModel::Exact { law } => law.iter().map(|&(w, e)| w * e.ln()).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCalibration {
    pub lambda: f64,
    /// `R_λ`, the per-point sensitivity of `Λ_n`.
    pub sensitivity: f64,
    /// Laplace scale `R_λ / ε`.
    pub b: f64,
    /// `-ln(1 - b²)`.
    pub compensator: f64,
    /// Value of the calibration objective at `λ`.
    pub objective: f64,
    pub epsilon: f64,
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
}

impl NoiseCalibration {
    /// Large budgets drive `b` towards zero; reported so callers can flag it.
    pub fn is_low_noise(&self) -> bool {
        self.b < 1e-3
    }
}

/// `R_λ` for an e-variable with range `[lo, hi]`.
pub fn sensitivity(lambda: f64, lo: f64, hi: f64) -> f64 {
    (lambda * (hi - 1.0)).ln_1p() - (lambda * (lo - 1.0)).ln_1p()
}

/// `Λ_n(E; λ)` for precomputed e-values.
pub fn mixed_log_statistic(values: &[f64], lambda: f64, range: (f64, f64)) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must lie in (0, 1)")));
    }
    let (lo, hi) = range;
    let slack = 1e-12 * hi;
    let mut sum = 0.0;
    for &v in values {
        if !(v >= lo - slack && v <= hi + slack) {
            return Err(Error::RangeViolation { value: v, lo, hi });
        }
        sum += (lambda * (v - 1.0)).ln_1p();
    }
    Ok(sum)
}

/// Supremum of the feasible mixing weights `{λ in (0, 1) : R_λ < ε}`.
pub fn max_feasible_lambda(lo: f64, hi: f64, epsilon: f64) -> f64 {
    if (hi / lo).ln() < epsilon {
        return 1.0;
    }
    let g = |l: f64| sensitivity(l, lo, hi) - epsilon;
    bisect(&g, 0.0, 1.0, 0.0)
}

/// Calibration objective `n · power(λ) + ln(1 - (R_λ/ε)²)`; `-inf` when
/// infeasible.
pub fn objective(lambda: f64, lo: f64, hi: f64, epsilon: f64, n: usize, model: &PowerModel) -> f64 {
    let r = sensitivity(lambda, lo, hi);
    if !(r < epsilon) {
        return f64::NEG_INFINITY;
    }
    let one_minus_b2 = (epsilon - r) * (epsilon + r) / (epsilon * epsilon);
    n as f64 * model.per_sample(lambda) + one_minus_b2.ln()
}

/// Calibrates `(λ, b)` under the concavity bound with per-sample power `mu`.
pub fn calibrate(lo: f64, hi: f64, epsilon: f64, n: usize, mu: f64) -> Result<NoiseCalibration> {
    calibrate_with(lo, hi, epsilon, n, &PowerModel::ConcavityBound { mu })
}

pub fn calibrate_with(lo: f64, hi: f64, epsilon: f64, n: usize, model: &PowerModel) -> Result<NoiseCalibration> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 < lo < hi, got [{lo}, {hi}]")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be positive")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let mu = model.mu();
    if !(mu > 0.0) {
        return Err(Error::NonpositivePower(mu));
    }
    let top = max_feasible_lambda(lo, hi, epsilon);
    if !(top > 0.0) {
        return Err(Error::InfeasibleNoise { epsilon });
    }
    let f = |l: f64| objective(l, lo, hi, epsilon, n, model);
    let (lambda, value) = golden_section_max(&f, top * 1e-12, top * (1.0 - 1e-12), 1e-12);
    if !value.is_finite() {
        return Err(Error::InfeasibleNoise { epsilon });
    }
    let r = sensitivity(lambda, lo, hi);
    let b = r / epsilon;
    Ok(NoiseCalibration {
        lambda,
        sensitivity: r,
        b,
        compensator: noise::laplace_log_mgf_at_one(b),
        objective: value,
        epsilon,
        n,
        lo,
        hi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivateBatchRelease {
    /// `Λ̃_n`, the log of the released e-value.
    pub log_evalue: f64,
    /// `Λ_n` before noise.
    pub statistic: f64,
    pub noise: f64,
    pub n: usize,
    pub calibration: NoiseCalibration,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReleaseOptions {
    pub noise: NoiseMode,
    /// Subtract the Laplace log-MGF. Turning this off breaks validity and is
    /// only used to check that validation catches it.
    pub compensate: bool,
}

impl Default for ReleaseOptions {
    fn default() -> Self {
        ReleaseOptions { noise: NoiseMode::Laplace, compensate: true }
    }
}

/// Releases `Λ̃_n` for `data`.
pub fn release(
    evar: &dyn BoundedEVariable,
    calibration: &NoiseCalibration,
    data: &[f64],
    seed: u64,
    opts: ReleaseOptions,
) -> Result<PrivateBatchRelease> {
    let values = data.iter().map(|&x| evar.value(x)).collect::<Result<Vec<_>>>()?;
    release_values(&values, calibration, seed, opts)
}

/// As [`release`] for precomputed e-values.
pub fn release_values(
    values: &[f64],
    calibration: &NoiseCalibration,
    seed: u64,
    opts: ReleaseOptions,
) -> Result<PrivateBatchRelease> {
    if values.len() != calibration.n {
        return Err(Error::InvalidParameter(format!(
            "calibrated for n = {}, got {} points",
            calibration.n,
            values.len()
        )));
    }
    let statistic = mixed_log_statistic(values, calibration.lambda, (calibration.lo, calibration.hi))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = noise::draw(&mut rng, calibration.b, opts.noise);
    let comp = if opts.compensate { calibration.compensator } else { 0.0 };
    Ok(PrivateBatchRelease {
        log_evalue: statistic + z - comp,
        statistic,
        noise: z,
        n: values.len(),
        calibration: *calibration,
        seed,
    })
}

/// A calibrated privatizer for one e-variable and sample size.
#[derive(Debug)]
pub struct BatchPrivatizer<'a> {
    evar: &'a dyn BoundedEVariable,
    calibration: NoiseCalibration,
}

impl<'a> BatchPrivatizer<'a> {
    pub fn new(evar: &'a dyn BoundedEVariable, epsilon: f64, n: usize, model: &PowerModel) -> Result<Self> {
        let (lo, hi) = evar.range();
        Ok(BatchPrivatizer { evar, calibration: calibrate_with(lo, hi, epsilon, n, model)? })
    }

    pub fn calibration(&self) -> &NoiseCalibration {
        &self.calibration
    }

    pub fn release(&self, data: &[f64], seed: u64) -> Result<PrivateBatchRelease> {
        release(self.evar, &self.calibration, data, seed, ReleaseOptions::default())
    }

    pub fn release_with(&self, data: &[f64], seed: u64, opts: ReleaseOptions) -> Result<PrivateBatchRelease> {
        release(self.evar, &self.calibration, data, seed, opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_values_give_zero() {
        let v = vec![1.0; 17];
        assert_eq!(mixed_log_statistic(&v, 0.3, (0.5, 2.0)).unwrap(), 0.0);
    }

    #[test]
    fn direct_arithmetic() {
        let v = mixed_log_statistic(&[2.0, 0.5], 0.5, (0.5, 2.0)).unwrap();
        assert!((v - (1.5f64.ln() + 0.75f64.ln())).abs() < 1e-15);
        assert!(mixed_log_statistic(&[2.0], 1.0, (0.5, 2.0)).is_err());
        assert!(matches!(
            mixed_log_statistic(&[3.0], 0.5, (0.5, 2.0)),
            Err(Error::RangeViolation { .. })
        ));
    }

    #[test]
    fn single_swap_moves_by_sensitivity() {
        let (lo, hi, lambda) = (0.6, 0.6 * 1f64.exp(), 0.8);
        let a = vec![lo; 10];
        let mut b = vec![lo; 9];
        b.push(hi);
        let d = mixed_log_statistic(&b, lambda, (lo, hi)).unwrap() - mixed_log_statistic(&a, lambda, (lo, hi)).unwrap();
        assert!((d - sensitivity(lambda, lo, hi)).abs() < 1e-14);
    }

    #[test]
    fn calibration_fields_are_consistent() {
        let (lo, hi) = (0.6, 0.6 * 1f64.exp());
        let c = calibrate(lo, hi, 1.0, 100, 0.1).unwrap();
        assert!(c.lambda > 0.0 && c.lambda < 1.0);
        assert!((c.sensitivity - sensitivity(c.lambda, lo, hi)).abs() < 1e-15);
        assert!((c.b - c.sensitivity).abs() < 1e-15);
        assert!(c.b < 1.0 && c.compensator > 0.0);
        assert!((c.compensator + (1.0 - c.b * c.b).ln()).abs() < 1e-12);
    }

    #[test]
    fn symmetric_range_caps_lambda_at_half() {
        let eps = 0.8f64;
        let top = max_feasible_lambda((-eps).exp(), eps.exp(), eps);
        assert!((top - 0.5).abs() < 1e-12);
    }

    #[test]
    fn calibration_errors() {
        assert!(matches!(calibrate(0.5, 2.0, 1.0, 10, 0.0), Err(Error::NonpositivePower(_))));
        assert!(calibrate(2.0, 0.5, 1.0, 10, 0.1).is_err());
        assert!(calibrate(0.5, 2.0, 1.0, 0, 0.1).is_err());
    }

    #[test]
    fn zero_noise_release_is_statistic_minus_compensator() {
        let c = calibrate(0.5, 1.5, 1.0, 3, 0.2).unwrap();
        let values = [0.5, 1.5, 1.0];
        let r = release_values(&values, &c, 9, ReleaseOptions { noise: NoiseMode::Disabled, compensate: true }).unwrap();
        let stat = mixed_log_statistic(&values, c.lambda, (0.5, 1.5)).unwrap();
        assert_eq!(r.log_evalue, stat - c.compensator);
        let again = release_values(&values, &c, 9, ReleaseOptions::default()).unwrap();
        let again2 = release_values(&values, &c, 9, ReleaseOptions::default()).unwrap();
        assert_eq!(again, again2);
    }
}
