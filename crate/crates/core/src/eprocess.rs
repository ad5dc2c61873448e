//! Private e-processes from bounded e-variables.
//!
//! Observations are grouped into batches ending at times `⌊t_j⌋`. At the end
//! of batch `j` the running log e-value gains
//! `λ Σ ln E(x) + Lap(λc) - C_λ`, with `C_λ = -ln(1 - c²λ²)`; between
//! boundaries the previous value is repeated. The schedule grows
//! geometrically so that the process loses at most a factor `ρ` in e-power at
//! any stopping time after `t_1`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::TestingPair;
use crate::error::{Error, Result};
use crate::evar::BoundedEVariable;
use crate::noise::{self, NoiseMode};
use crate::numeric::golden_section_max;
use crate::optimal::OptimalEVariable;
use crate::seed::derive_seed;

/// How close the search for `λ` gets to the ends of `(1/ρ, min(1, 1/c))`.
const ENDPOINT_GAP: f64 = 1e-9;

/// `C_λ = -ln(1 - c²λ²)`.
pub fn schedule_compensator(c: f64, lambda: f64) -> f64 {
    let cl = c * lambda;
    -(-cl * cl).ln_1p()
}

/// Minimum stopping time `t_1(λ) = ρλ + ρ²λC_λ / (μ(ρλ - 1)²)`.
pub fn first_boundary(c: f64, mu: f64, rho: f64, lambda: f64) -> f64 {
    let k = rho * lambda - 1.0;
    rho * lambda + rho * rho * lambda * schedule_compensator(c, lambda) / (mu * k * k)
}

/// `t_j` in closed form.
pub fn closed_form_boundary(j: u32, c: f64, mu: f64, rho: f64, lambda: f64) -> f64 {
    let cl = schedule_compensator(c, lambda);
    let k = rho * lambda - 1.0;
    (rho * lambda).powi(j as i32) + rho * cl * (j as f64 - 1.0) / (mu * k) + rho * rho * lambda * cl / (mu * k * k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSchedule {
    pub rho: f64,
    /// Log-sensitivity of the e-variable in units of `epsilon`.
    pub c: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub c_lambda: f64,
    pub mu: f64,
    pub t1: f64,
    /// Unfloored `t_j` up to the horizon.
    pub raw: Vec<f64>,
    /// Distinct floored boundaries, strictly increasing.
    pub boundaries: Vec<u64>,
    pub horizon: u64,
}

impl BatchSchedule {
    /// `t_1` at the chosen `λ`.
    pub fn minimum_time(&self) -> f64 {
        self.t1
    }

    /// Laplace scale of each batch update.
    pub fn noise_scale(&self) -> f64 {
        self.lambda * self.c
    }
}

/// Builds the batching schedule, choosing `λ ∈ (1/ρ, min(1, 1/c))` to minimise
/// `t_1`, and enumerating boundaries up to `horizon`.
pub fn build_schedule(c: f64, epsilon: f64, mu: f64, rho: f64, horizon: u64) -> Result<BatchSchedule> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("c = {c} must be positive")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be positive")));
    }
    if !(rho > c.max(1.0)) || !rho.is_finite() {
        return Err(Error::InvalidRho { rho, c });
    }
    if !(mu > 0.0) {
        return Err(Error::NonpositivePower(mu));
    }
    let lo = 1.0 / rho + ENDPOINT_GAP;
    let hi = (1.0f64).min(1.0 / c) - ENDPOINT_GAP;
    let neg_t1 = |l: f64| -first_boundary(c, mu, rho, l);
    let (lambda, neg) = golden_section_max(&neg_t1, lo, hi, 1e-12);
    let t1 = -neg;
    let c_lambda = schedule_compensator(c, lambda);

    let mut raw = Vec::new();
    let mut t = t1;
    let mut j = 1.0;
    while t <= horizon as f64 && t.is_finite() {
        raw.push(t);
        t = rho * (lambda * t - j * c_lambda / mu);
        j += 1.0;
    }
    let mut boundaries: Vec<u64> = raw.iter().map(|t| (t.floor() as u64).max(1)).collect();
    boundaries.dedup();
    Ok(BatchSchedule { rho, c, epsilon, lambda, c_lambda, mu, t1, raw, boundaries, horizon })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProcessOptions {
    pub noise: NoiseMode,
    /// Subtract `C_λ` at each update. Only turned off to exercise validation.
    pub compensate: bool,
}

impl Default for ProcessOptions {
    fn default() -> Self {
        ProcessOptions { noise: NoiseMode::Laplace, compensate: true }
    }
}

/// Running state of one private e-process.
#[derive(Debug, Clone)]
pub struct EProcessState {
    schedule: Arc<BatchSchedule>,
    lo: f64,
    hi: f64,
    log_e: f64,
    time: u64,
    next_batch: usize,
    batch_sum: f64,
    buffered: u64,
    rng: ChaCha8Rng,
    opts: ProcessOptions,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub log_e: f64,
    /// Whether this step closed a batch.
    pub emitted: bool,
}

impl EProcessState {
    /// `range` is the certified range of the e-variable; its log-width must
    /// not exceed `c·ε`.
    pub fn new(schedule: Arc<BatchSchedule>, range: (f64, f64), seed: u64, opts: ProcessOptions) -> Result<Self> {
        let (lo, hi) = range;
        let width = (hi / lo).ln();
        if !(lo > 0.0 && width >= 0.0) || width > schedule.c * schedule.epsilon * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "e-variable log-width {width} exceeds c·ε = {}",
                schedule.c * schedule.epsilon
            )));
        }
        Ok(EProcessState {
            schedule,
            lo,
            hi,
            log_e: 0.0,
            time: 0,
            next_batch: 0,
            batch_sum: 0.0,
            buffered: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            opts,
        })
    }

    pub fn schedule(&self) -> &BatchSchedule {
        &self.schedule
    }

    /// `ln Ẽ_t`.
    pub fn log_e(&self) -> f64 {
        self.log_e
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn buffered(&self) -> u64 {
        self.buffered
    }

    /// Number of batches emitted so far.
    pub fn batches(&self) -> usize {
        self.next_batch
    }

    /// Whether at least one more boundary lies within the horizon.
    pub fn has_pending_boundary(&self) -> bool {
        self.next_batch < self.schedule.boundaries.len()
    }

    /// Consumes one e-variable value.
    pub fn step_value(&mut self, e: f64) -> Result<Step> {
        let slack = 1e-12 * self.hi;
        if !(e >= self.lo - slack && e <= self.hi + slack) {
            return Err(Error::RangeViolation { value: e, lo: self.lo, hi: self.hi });
        }
        self.time += 1;
        self.batch_sum += e.ln();
        self.buffered += 1;
        let at_boundary = self.schedule.boundaries.get(self.next_batch) == Some(&self.time);
        if !at_boundary {
            return Ok(Step { log_e: self.log_e, emitted: false });
        }
        let s = &self.schedule;
        let z = noise::draw(&mut self.rng, s.noise_scale(), self.opts.noise);
        let comp = if self.opts.compensate { s.c_lambda } else { 0.0 };
        self.log_e += s.lambda * self.batch_sum + z - comp;
        self.batch_sum = 0.0;
        self.buffered = 0;
        self.next_batch += 1;
        Ok(Step { log_e: self.log_e, emitted: true })
    }
}

/// An e-variable with the quantities needed to schedule it.
#[derive(Debug, Clone)]
pub struct ScheduledStatistic {
    pub evar: Arc<dyn BoundedEVariable>,
    pub schedule: Arc<BatchSchedule>,
}

impl ScheduledStatistic {
    pub fn new(evar: Arc<dyn BoundedEVariable>, epsilon: f64, mu: f64, rho: f64, horizon: u64) -> Result<Self> {
        let c = (evar.log_width() / epsilon).max(1.0);
        let schedule = Arc::new(build_schedule(c, epsilon, mu, rho, horizon)?);
        Ok(ScheduledStatistic { evar, schedule })
    }

    /// `E*` at budget `epsilon`, with `μ` its private rate and `c = 1`.
    pub fn optimal(pair: &TestingPair, epsilon: f64, rho: f64, horizon: u64) -> Result<Self> {
        let evar = OptimalEVariable::new(pair.clone(), epsilon)?;
        let mu = evar.construction().rate;
        if evar.construction().degenerate || !(mu > 0.0) {
            return Err(Error::NonpositivePower(mu));
        }
        let schedule = Arc::new(build_schedule(1.0, epsilon, mu, rho, horizon)?);
        Ok(ScheduledStatistic { evar: Arc::new(evar), schedule })
    }

    pub fn start(&self, seed: u64, opts: ProcessOptions) -> Result<EProcessState> {
        EProcessState::new(self.schedule.clone(), self.evar.range(), seed, opts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    /// One-sided rejection of the null.
    Reject,
    AcceptP,
    AcceptQ,
    Inconclusive,
}

impl Decision {
    pub fn label(self) -> &'static str {
        match self {
            Decision::Reject => "reject",
            Decision::AcceptP => "accept_p",
            Decision::AcceptQ => "accept_q",
            Decision::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InconclusiveReason {
    /// The stream ended before the first batch boundary.
    BeforeFirstBoundary,
    /// Boundaries were reached but no threshold was crossed by `max_n`.
    Horizon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequentialOutcome {
    pub decision: Decision,
    /// Observations consumed; `max_n` (or stream length) when inconclusive.
    pub stopping_time: u64,
    /// Final log e-value of the deciding process, where meaningful.
    pub log_e: Option<f64>,
    pub reason: Option<InconclusiveReason>,
}

impl SequentialOutcome {
    pub fn is_censored(&self) -> bool {
        self.decision == Decision::Inconclusive
    }
}

/// A sequential test consuming a stream of observations.
pub trait SequentialTest: Send + Sync {
    fn name(&self) -> &'static str;

    fn run(&self, stream: &mut dyn Iterator<Item = f64>, max_n: u64, seed: u64) -> Result<SequentialOutcome>;
}

/// Level-α test rejecting the null once `Ẽ_t >= 1/α`.
#[derive(Debug, Clone)]
pub struct OneSidedTest {
    pub statistic: ScheduledStatistic,
    pub alpha: f64,
    pub opts: ProcessOptions,
}

impl OneSidedTest {
    pub fn new(statistic: ScheduledStatistic, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1]")));
        }
        Ok(OneSidedTest { statistic, alpha, opts: ProcessOptions::default() })
    }
}

impl SequentialTest for OneSidedTest {
    fn name(&self) -> &'static str {
        "eprocess"
    }

    fn run(&self, stream: &mut dyn Iterator<Item = f64>, max_n: u64, seed: u64) -> Result<SequentialOutcome> {
        let threshold = (1.0 / self.alpha).ln();
        let mut state = self.statistic.start(seed, self.opts)?;
        while state.time() < max_n {
            let Some(x) = stream.next() else { break };
            let step = state.step_value(self.statistic.evar.value(x)?)?;
            if step.emitted && step.log_e >= threshold {
                return Ok(SequentialOutcome {
                    decision: Decision::Reject,
                    stopping_time: state.time(),
                    log_e: Some(step.log_e),
                    reason: None,
                });
            }
        }
        Ok(inconclusive(state.time(), state.batches() > 0, state.log_e()))
    }
}

fn inconclusive(time: u64, reached_boundary: bool, log_e: f64) -> SequentialOutcome {
    SequentialOutcome {
        decision: Decision::Inconclusive,
        stopping_time: time,
        log_e: Some(log_e),
        reason: Some(if reached_boundary {
            InconclusiveReason::Horizon
        } else {
            InconclusiveReason::BeforeFirstBoundary
        }),
    }
}

/// Convenience wrapper for the optimal statistic.
pub fn run_one_sided_test(
    pair: &TestingPair,
    epsilon: f64,
    rho: f64,
    alpha: f64,
    stream: &mut dyn Iterator<Item = f64>,
    max_n: u64,
    seed: u64,
) -> Result<SequentialOutcome> {
    let stat = ScheduledStatistic::optimal(pair, epsilon, rho, max_n)?;
    OneSidedTest::new(stat, alpha)?.run(stream, max_n, seed)
}

/// Two e-processes at budget `ε/2` each, stepped in lockstep on the same data:
/// one for `P` against `Q` (crossing `1/α` accepts `Q`) and one for `Q`
/// against `P` (crossing `1/β` accepts `P`).
#[derive(Debug, Clone)]
pub struct TwoSidedTest {
    pub for_q: ScheduledStatistic,
    pub for_p: ScheduledStatistic,
    pub alpha: f64,
    pub beta: f64,
    pub opts: ProcessOptions,
}

impl TwoSidedTest {
    pub fn optimal(pair: &TestingPair, epsilon: f64, rho: f64, alpha: f64, beta: f64, horizon: u64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        let half = epsilon / 2.0;
        Self::with_statistics(
            ScheduledStatistic::optimal(pair, half, rho, horizon)?,
            ScheduledStatistic::optimal(&pair.swapped()?, half, rho, horizon)?,
            alpha,
            beta,
        )
    }

    /// `for_q` must be an e-variable for `P`, `for_p` one for `Q`, each
    /// scheduled at half the total budget.
    pub fn with_statistics(for_q: ScheduledStatistic, for_p: ScheduledStatistic, alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        Ok(TwoSidedTest { for_q, for_p, alpha, beta, opts: ProcessOptions::default() })
    }
}

impl SequentialTest for TwoSidedTest {
    fn name(&self) -> &'static str {
        "eprocess"
    }

    fn run(&self, stream: &mut dyn Iterator<Item = f64>, max_n: u64, seed: u64) -> Result<SequentialOutcome> {
        let up = (1.0 / self.alpha).ln();
        let down = (1.0 / self.beta).ln();
        let mut q_side = self.for_q.start(derive_seed(seed, &[0]), self.opts)?;
        let mut p_side = self.for_p.start(derive_seed(seed, &[1]), self.opts)?;
        while q_side.time() < max_n {
            let Some(x) = stream.next() else { break };
            let sq = q_side.step_value(self.for_q.evar.value(x)?)?;
            let sp = p_side.step_value(self.for_p.evar.value(x)?)?;
            let over_q = if sq.emitted { sq.log_e - up } else { f64::NEG_INFINITY };
            let over_p = if sp.emitted { sp.log_e - down } else { f64::NEG_INFINITY };
            if over_q >= 0.0 || over_p >= 0.0 {
                // Simultaneous crossings go to the larger excess; exact ties to Q.
                let (decision, log_e) =
                    if over_q >= over_p { (Decision::AcceptQ, sq.log_e) } else { (Decision::AcceptP, sp.log_e) };
                return Ok(SequentialOutcome { decision, stopping_time: q_side.time(), log_e: Some(log_e), reason: None });
            }
        }
        let reached = q_side.batches() > 0 || p_side.batches() > 0;
        let mut out = inconclusive(q_side.time(), reached, q_side.log_e());
        out.log_e = None;
        Ok(out)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn run_two_sided_test(
    pair: &TestingPair,
    epsilon: f64,
    rho: f64,
    alpha: f64,
    beta: f64,
    stream: &mut dyn Iterator<Item = f64>,
    max_n: u64,
    seed: u64,
) -> Result<SequentialOutcome> {
    TwoSidedTest::optimal(pair, epsilon, rho, alpha, beta, max_n)?.run(stream, max_n, seed)
}

/// Lower bound on `E^Q[N]` for any level-(α, β) test, given the private rate.
pub fn stopping_time_lower_bound(alpha: f64, beta: f64, rate: f64) -> Result<f64> {
    for (name, v) in [("alpha", alpha), ("beta", beta)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidParameter(format!("{name} = {v} must lie in (0, 1)")));
        }
    }
    if !(rate > 0.0) {
        return Err(Error::ZeroRate);
    }
    Ok(stopping_time_numerator(alpha, beta) / rate)
}

/// `(1-β) ln((1-β)/α) + β ln(β/(1-α))`.
pub fn stopping_time_numerator(alpha: f64, beta: f64) -> f64 {
    (1.0 - beta) * ((1.0 - beta) / alpha).ln() + beta * (beta / (1.0 - alpha)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensator_vanishes_at_zero() {
        assert_eq!(schedule_compensator(1.0, 0.0), 0.0);
        assert!(schedule_compensator(2.0, 0.3) > 0.0);
    }

    #[test]
    fn recurrence_matches_closed_form() {
        let s = build_schedule(1.0, 1.0, 0.1, 3.0, u64::MAX).unwrap();
        assert!(s.raw.len() >= 20);
        for (j, t) in s.raw.iter().enumerate().take(20) {
            let cf = closed_form_boundary(j as u32 + 1, 1.0, 0.1, 3.0, s.lambda);
            assert!((t - cf).abs() <= 1e-9 * cf, "j={} {t} {cf}", j + 1);
        }
    }

    #[test]
    fn optimised_t1_beats_proof_choice() {
        for rho in [1.5, 3.0, 10.0] {
            let s = build_schedule(1.0, 1.0, 0.1, rho, 10).unwrap();
            let proof = first_boundary(1.0, 0.1, rho, 1.0 / (rho * 1.0f64).sqrt());
            assert!(s.t1 <= proof * (1.0 + 1e-12));
        }
    }

    #[test]
    fn schedule_errors() {
        assert!(matches!(build_schedule(2.0, 1.0, 0.1, 2.0, 10), Err(Error::InvalidRho { .. })));
        assert!(matches!(build_schedule(1.0, 1.0, 0.1, 1.0, 10), Err(Error::InvalidRho { .. })));
        assert!(matches!(build_schedule(1.0, 1.0, 0.0, 3.0, 10), Err(Error::NonpositivePower(_))));
    }

    #[test]
    fn boundaries_strictly_increase() {
        let s = build_schedule(1.0, 1.0, 0.01, 1.5, 10_000_000).unwrap();
        assert!(s.boundaries.windows(2).all(|w| w[0] < w[1]));
        assert!(s.boundaries[0] >= 1);
    }

    #[test]
    fn value_only_changes_at_boundaries() {
        let s = Arc::new(build_schedule(1.0, 1.0, 0.5, 3.0, 1000).unwrap());
        let mut st = EProcessState::new(s.clone(), (0.7, 0.7 * 1f64.exp()), 1, ProcessOptions::default()).unwrap();
        let mut prev = 0.0;
        for t in 1..=1000u64 {
            let step = st.step_value(1.2).unwrap();
            if s.boundaries.contains(&t) {
                assert!(step.emitted);
            } else {
                assert!(!step.emitted);
                assert_eq!(step.log_e, prev);
            }
            prev = step.log_e;
        }
    }

    #[test]
    fn zero_noise_unit_batch_loses_compensator() {
        let s = Arc::new(build_schedule(1.0, 1.0, 0.5, 3.0, 1000).unwrap());
        let opts = ProcessOptions { noise: NoiseMode::Disabled, compensate: true };
        let mut st = EProcessState::new(s.clone(), (0.6, 1.5), 1, opts).unwrap();
        let first = s.boundaries[0];
        let mut last = None;
        for _ in 0..first {
            last = Some(st.step_value(1.0).unwrap());
        }
        let last = last.unwrap();
        assert!(last.emitted);
        assert!((last.log_e + s.c_lambda).abs() < 1e-15);
    }

    #[test]
    fn range_is_enforced() {
        let s = Arc::new(build_schedule(1.0, 1.0, 0.5, 3.0, 100).unwrap());
        let mut st = EProcessState::new(s.clone(), (0.6, 1.5), 1, ProcessOptions::default()).unwrap();
        assert!(matches!(st.step_value(2.0), Err(Error::RangeViolation { .. })));
        assert!(EProcessState::new(s, (0.1, 1.5), 1, ProcessOptions::default()).is_err());
    }

    #[test]
    fn numerator_cases() {
        assert_eq!(stopping_time_numerator(0.5, 0.5), 0.0);
        assert!(matches!(stopping_time_lower_bound(0.1, 0.1, 0.0), Err(Error::ZeroRate)));
        let a = stopping_time_lower_bound(0.025, 0.025, 0.1).unwrap();
        let b = stopping_time_lower_bound(0.025, 0.025, 0.2).unwrap();
        assert!(b < a);
    }
}
