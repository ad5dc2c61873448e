//! Bounded e-variables: nonnegative statistics with `E^P[E] <= 1` whose values
//! lie in a certified range `[lo, hi]`.

use crate::dist::SimpleDistribution;
use crate::error::Result;

pub trait BoundedEVariable: Send + Sync + std::fmt::Debug {
    fn value(&self, x: f64) -> Result<f64>;

    /// Certified range `[lo, hi]` with `0 < lo <= hi`.
    fn range(&self) -> (f64, f64);

    fn name(&self) -> &'static str;

    /// `ln(hi / lo)`, the per-point log-sensitivity.
    fn log_width(&self) -> f64 {
        let (lo, hi) = self.range();
        (hi / lo).ln()
    }
}

/// Law of `E(X)` for finite `dist`, as `(probability, value)` pairs.
pub fn law_under(evar: &dyn BoundedEVariable, dist: &SimpleDistribution) -> Result<Option<Vec<(f64, f64)>>> {
    let Some(atoms) = dist.atoms() else { return Ok(None) };
    atoms
        .iter()
        .map(|a| Ok((a.prob, evar.value(a.point)?)))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}
