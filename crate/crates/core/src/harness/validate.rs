//! Cross-module self-checks run by `validate` mode.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::TestingPair;
use crate::dpsprt::{DpSprt, DpSprtConfig};
use crate::eprocess::{
    build_schedule, closed_form_boundary, stopping_time_numerator, Decision, ProcessOptions, ScheduledStatistic,
    SequentialTest,
};
use crate::error::Result;
use crate::evar::{law_under, BoundedEVariable};
use crate::noise::{self, NoiseMode};
use crate::optimal::{solve_lambda_star, OptimalEVariable, DEFAULT_TOL};
use crate::par::map_trials;
use crate::privatize::{calibrate_with, mixed_log_statistic, release_values, PowerModel, ReleaseOptions};
use crate::seed::derive_seed;
use crate::tslr::epsilon_star;

use super::config::ExperimentConfig;
use super::stream::PairedStream;

/// Deliberate bugs used to confirm the checks can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Drop the Laplace / schedule compensator from every release.
    OmitCompensator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, measured: f64, tolerance: f64, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), measured, tolerance, passed, detail: detail.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<28} measured = {:<24e} tolerance = {:<12e} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.tolerance,
                c.detail
            )?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        writeln!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

/// `min_{q'} KL(Bern(q') || Bern(p)) + ε|q' - q|` over `points + 1` grid values.
pub fn binary_dual_rate(p: f64, q: f64, epsilon: f64, points: usize) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    (0..=points)
        .map(|i| {
            let x = i as f64 / points as f64;
            term(x, p) + term(1.0 - x, 1.0 - p) + epsilon * (x - q).abs()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Non-private SPRT on the same stream.
pub fn classical_sprt(llr: impl Fn(f64) -> f64, upper: f64, lower: f64, stream: &mut dyn Iterator<Item = f64>, max_n: u64) -> (Decision, u64) {
    let mut s = 0.0;
    let mut n = 0;
    while n < max_n {
        let Some(x) = stream.next() else { break };
        n += 1;
        s += llr(x);
        if s >= upper {
            return (Decision::AcceptQ, n);
        }
        if s <= lower {
            return (Decision::AcceptP, n);
        }
    }
    (Decision::Inconclusive, n)
}

pub fn run_validate(cfg: &ExperimentConfig, fault: Option<Fault>) -> Result<ValidationReport> {
    let pair = TestingPair::new(cfg.null_dist()?, cfg.alt_dist()?)?;
    let compensate = fault != Some(Fault::OmitCompensator);
    let mut rep = ValidationReport::default();

    // Duality and calibration of E*.
    let binary = pair.support_points().filter(|s| s.len() == 2);
    for eps in [0.25, 1.0, 4.0] {
        let c = solve_lambda_star(&pair, eps, DEFAULT_TOL)?;
        if let Some(s) = binary {
            let p = pair.null().density(s[1]);
            let q = pair.alt().density(s[1]);
            let dual = binary_dual_rate(p, q, eps, 1_000_000);
            let gap = (c.rate - dual).abs();
            rep.push(&format!("duality eps={eps}"), gap, 1e-6, gap <= 1e-6, format!("primal {} dual {dual}", c.rate));
        }
        let e = OptimalEVariable::new(pair.clone(), eps)?;
        let mean = pair.null().expect(|x| e.value(x).unwrap_or(f64::NAN))?;
        let tol = if pair.is_finite() { 1e-10 } else { 1e-7 };
        let dev = (mean.value - 1.0).abs();
        rep.push(&format!("calibration eps={eps}"), dev, tol, dev <= tol, "|E^P[E*] - 1|");
    }

    // Batch privatizer at ε = 1.
    let eps = 1.0;
    let e: Arc<dyn BoundedEVariable> = Arc::new(OptimalEVariable::new(pair.clone(), eps)?);
    let (lo, hi) = e.range();
    let model = match law_under(e.as_ref(), pair.alt())? {
        Some(law) => PowerModel::Exact { law },
        None => PowerModel::ConcavityBound { mu: solve_lambda_star(&pair, eps, DEFAULT_TOL)?.rate },
    };
    let cal = calibrate_with(lo, hi, eps, cfg.n, &model)?;
    if let Some(law) = law_under(e.as_ref(), pair.null())? {
        let m1: f64 = law.iter().map(|&(w, v)| w * (1.0 - cal.lambda + cal.lambda * v)).sum();
        let comp = if compensate { cal.compensator } else { 0.0 };
        let ln_mean = cal.n as f64 * m1.ln() + noise::laplace_log_mgf_at_one(cal.b) - comp;
        rep.push("batch exact mean", ln_mean.exp(), 1.0 + 1e-9, ln_mean.exp() <= 1.0 + 1e-9, format!("n = {}, b = {:.4}", cal.n, cal.b));
    }
    let opts = ReleaseOptions { noise: NoiseMode::Laplace, compensate };
    let draws = map_trials(cfg.mc_trials, |i| -> Result<f64> {
        let mut s = PairedStream::new(pair.null().clone(), derive_seed(cfg.seed, &[100, i as u64, 0]));
        let values = s.replay().take(cfg.n).map(|x| e.value(x)).collect::<Result<Vec<_>>>()?;
        Ok(release_values(&values, &cal, derive_seed(cfg.seed, &[100, i as u64, 1]), opts)?.log_evalue.exp())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (m, se) = mean_se(&draws);
    rep.push("batch MC mean", m, 1.0 + 3.0 * se, m <= 1.0 + 3.0 * se, format!("{} null trials, SE = {se:.4}", draws.len()));

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[101]));
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let mut a: Vec<f64> = (0..cfg.n).map(|_| rng.random_range(lo..=hi)).collect();
        let base = mixed_log_statistic(&a, cal.lambda, (lo, hi))?;
        let k = rng.random_range(0..cfg.n);
        a[k] = rng.random_range(lo..=hi);
        worst = worst.max((mixed_log_statistic(&a, cal.lambda, (lo, hi))? - base).abs());
    }
    let cap = cal.b * eps;
    rep.push("batch sensitivity audit", worst, cap, worst <= cap * (1.0 + 1e-12), "max |ΔΛ| over 1000 neighbours vs b·ε");

    // Schedule recurrence vs closed form.
    let mut worst = 0.0f64;
    for mu in [0.01, 0.1, 0.5] {
        for rho in [1.5, 3.0, 10.0] {
            let s = build_schedule(1.0, 1.0, mu, rho, u64::MAX)?;
            for (j, t) in s.raw.iter().enumerate().take(20) {
                let cf = closed_form_boundary(j as u32 + 1, 1.0, mu, rho, s.lambda);
                worst = worst.max(((t - cf) / cf).abs());
            }
        }
    }
    rep.push("schedule closed form", worst, 1e-6, worst <= 1e-6, "max relative gap, j <= 20");

    // E-process: exact per-batch bound and Monte Carlo supermartingale check.
    let horizon = 1000;
    let mu = solve_lambda_star(&pair, eps, DEFAULT_TOL)?.rate;
    let stat = ScheduledStatistic::new(e.clone(), eps, mu, cfg.rho, horizon)?;
    if let Some(law) = law_under(e.as_ref(), pair.null())? {
        let sch = &stat.schedule;
        let m_lambda: f64 = law.iter().map(|&(w, v)| w * v.powf(sch.lambda)).sum();
        let comp = if compensate { sch.c_lambda } else { 0.0 };
        let mut prev = 0;
        let mut worst = f64::NEG_INFINITY;
        for &t in &sch.boundaries {
            let len = (t - prev) as f64;
            worst = worst.max(len * m_lambda.ln() + noise::laplace_log_mgf_at_one(sch.noise_scale()) - comp);
            prev = t;
        }
        rep.push("eprocess batch exact", worst, 0.0, worst <= 1e-12, "max ln E^P[exp(increment)]");
    }
    let streams = (cfg.mc_trials / 10).max(100);
    let popts = ProcessOptions { noise: NoiseMode::Laplace, compensate };
    let paths = map_trials(streams, |i| -> Result<Vec<f64>> {
        let mut st = stat.start(derive_seed(cfg.seed, &[102, i as u64, 1]), popts)?;
        let mut s = PairedStream::new(pair.null().clone(), derive_seed(cfg.seed, &[102, i as u64, 0]));
        let mut out = Vec::new();
        for x in s.replay().take(horizon as usize) {
            if st.step_value(e.value(x)?)?.emitted {
                out.push(st.log_e().exp());
            }
        }
        Ok(out)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut worst = f64::NEG_INFINITY;
    let mut detail = String::new();
    for j in 0..stat.schedule.boundaries.len() {
        let col: Vec<f64> = paths.iter().map(|p| p[j]).collect();
        let (m, se) = mean_se(&col);
        if m - 1.0 - 3.0 * se > worst {
            worst = m - 1.0 - 3.0 * se;
            detail = format!("t = {}: mean {m:.4}, SE {se:.4}", stat.schedule.boundaries[j]);
        }
    }
    rep.push("eprocess MC mean", worst, 0.0, worst <= 0.0, format!("{streams} streams; worst boundary {detail}"));

    // tsLR constants.
    let (star, coef) = epsilon_star();
    let ok = (star - 2.334).abs() <= 1e-3 && (coef - 0.221).abs() <= 1e-3;
    rep.push("tslr constants", star, 1e-3, ok, format!("eps* = {star:.6}, coefficient = {coef:.6}"));

    // DP-SPRT without noise or subsampling is the classical SPRT.
    if pair.is_finite() {
        let cfg_s = DpSprtConfig { subsample_rate: 1.0, noise: NoiseMode::Disabled, ..DpSprtConfig::auto(eps, cfg.alpha, cfg.beta) };
        let sprt = DpSprt::new(pair.clone(), cfg_s)?;
        let mut mismatches = 0;
        for i in 0..200u64 {
            let mut s = PairedStream::new(pair.alt().clone(), derive_seed(cfg.seed, &[103, i]));
            let a = sprt.run(&mut s.replay(), 10_000, i)?;
            let b = classical_sprt(|x| sprt.llr(x), cfg_s.upper(), cfg_s.lower(), &mut s.replay(), 10_000);
            if (a.decision, a.stopping_time) != b {
                mismatches += 1;
            }
        }
        rep.push("dpsprt noiseless fidelity", mismatches as f64, 0.0, mismatches == 0, "mismatches over 200 streams");
    }

    // Planner numerator is a binary KL divergence.
    let (a, b) = (cfg.alpha, cfg.beta);
    let kl = (1.0 - b) * ((1.0 - b) / a).ln() + b * (b / (1.0 - a)).ln();
    let gap = (stopping_time_numerator(a, b) - kl).abs();
    rep.push("planner numerator", gap, 1e-12, gap <= 1e-12, "vs KL(Bern(1-beta) || Bern(alpha))");

    Ok(rep)
}

/// Text summary written to `report.txt`.
pub fn render(rep: &ValidationReport, fault: Option<Fault>) -> String {
    let mut s = String::new();
    if let Some(f) = fault {
        let _ = writeln!(s, "fault injected: {f:?}");
    }
    let _ = write!(s, "{rep}");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_oracle_equal_pair_is_zero() {
        assert_eq!(binary_dual_rate(0.4, 0.4, 1.0, 1000), 0.0);
    }

    #[test]
    fn mean_se_basic() {
        let (m, se) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
