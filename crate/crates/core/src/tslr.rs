//! Truncated, scaled likelihood ratio: a distribution-free bounded e-variable.
//!
//! `tsLR_ε(x) = e^-ε + (1 - e^-ε) · min(1 + e^ε, LR(x))`, which lies in
//! `[e^-ε, e^ε]`. For small `ε` the statistic is computed at a larger level
//! `ε*` and raised to the power `ε/ε*`, keeping the same range.

use std::sync::OnceLock;

use crate::dist::TestingPair;
use crate::error::{Error, Result};
use crate::evar::BoundedEVariable;
use crate::numeric::golden_section_max;

/// `tsLR_ε` as a function of the likelihood ratio.
pub fn tslr_of_ratio(lr: f64, epsilon: f64) -> f64 {
    let floor = (-epsilon).exp();
    floor + (1.0 - floor) * lr.min(1.0 + epsilon.exp())
}

pub fn tslr(pair: &TestingPair, epsilon: f64, x: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    Ok(tslr_of_ratio(pair.likelihood_ratio(x)?, epsilon))
}

/// The e-power guarantee factor of `tsLR_{ε'}` rescaled to unit budget:
/// `((ε' - 1)(1 - e^-ε') / ε') · (1 / ε')`.
pub fn power_coefficient(eps_prime: f64) -> f64 {
    (eps_prime - 1.0) * (1.0 - (-eps_prime).exp()) / (eps_prime * eps_prime)
}

/// `(ε*, coefficient at ε*)`, the maximiser of [`power_coefficient`] over
/// `ε' >= 1`. Computed once.
pub fn epsilon_star() -> (f64, f64) {
    static STAR: OnceLock<(f64, f64)> = OnceLock::new();
    *STAR.get_or_init(|| golden_section_max(&power_coefficient, 1.0, 20.0, 1e-10))
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be positive")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TslrStatistic {
    pub epsilon: f64,
    pub epsilon_prime: f64,
    pub exponent: f64,
}

impl TslrStatistic {
    pub fn new(epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        let (star, _) = epsilon_star();
        if epsilon >= star {
            Ok(TslrStatistic { epsilon, epsilon_prime: epsilon, exponent: 1.0 })
        } else {
            Ok(TslrStatistic { epsilon, epsilon_prime: star, exponent: epsilon / star })
        }
    }

    pub fn of_ratio(&self, lr: f64) -> f64 {
        let base = tslr_of_ratio(lr, self.epsilon_prime);
        if self.exponent == 1.0 { base } else { base.powf(self.exponent) }
    }
}

/// `tsLR_ε^{ε*}`: the unadjusted statistic when `ε >= ε*`, otherwise
/// `tsLR_{ε*}^{ε/ε*}`.
pub fn tslr_extended(pair: &TestingPair, epsilon: f64, x: f64) -> Result<f64> {
    Ok(TslrStatistic::new(epsilon)?.of_ratio(pair.likelihood_ratio(x)?))
}

#[derive(Debug, Clone)]
pub struct TslrEVariable {
    pair: TestingPair,
    stat: TslrStatistic,
}

impl TslrEVariable {
    pub fn new(pair: TestingPair, epsilon: f64) -> Result<Self> {
        Ok(TslrEVariable { pair, stat: TslrStatistic::new(epsilon)? })
    }

    pub fn statistic(&self) -> &TslrStatistic {
        &self.stat
    }
}

impl BoundedEVariable for TslrEVariable {
    fn value(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        // Rounding in powf can step just past the certified ends.
        Ok(self.stat.of_ratio(self.pair.likelihood_ratio(x)?).clamp(lo, hi))
    }

    fn range(&self) -> (f64, f64) {
        ((-self.stat.epsilon).exp(), self.stat.epsilon.exp())
    }

    fn name(&self) -> &'static str {
        "tslr"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::SimpleDistribution;

    #[test]
    fn unit_ratio_maps_to_one() {
        for eps in [0.1, 1.0, 3.0] {
            assert!((tslr_of_ratio(1.0, eps) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn saturates_at_e_to_epsilon() {
        for eps in [0.5, 1.0, 2.5] {
            let cap = 1.0 + f64::exp(eps);
            assert!((tslr_of_ratio(cap, eps) - eps.exp()).abs() < 1e-13);
            assert!((tslr_of_ratio(10.0 * cap, eps) - eps.exp()).abs() < 1e-13);
            assert!((tslr_of_ratio(0.0, eps) - (-eps).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn constants() {
        let (star, coef) = epsilon_star();
        assert!((star - 2.334).abs() < 1e-3, "{star}");
        assert!((coef - 0.221).abs() < 1e-3, "{coef}");
    }

    #[test]
    fn exponent_switch() {
        let (star, _) = epsilon_star();
        assert_eq!(TslrStatistic::new(3.0).unwrap().exponent, 1.0);
        let s = TslrStatistic::new(0.5).unwrap();
        assert_eq!(s.epsilon_prime, star);
        assert!((s.exponent - 0.5 / star).abs() < 1e-15);
        assert!(TslrStatistic::new(-1.0).is_err());
    }

    #[test]
    fn bernoulli_null_mean_at_most_one() {
        let pair = TestingPair::new(SimpleDistribution::bernoulli(0.3).unwrap(), SimpleDistribution::bernoulli(0.7).unwrap())
            .unwrap();
        let m = pair.null().expect(|x| tslr(&pair, 1.0, x).unwrap()).unwrap().value;
        assert!(m <= 1.0 + 1e-15);
        let m = pair.null().expect(|x| tslr_extended(&pair, 1.0, x).unwrap()).unwrap().value;
        assert!(m <= 1.0 + 1e-15);
    }
}
