//! Experiment runners behind the CLI modes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::dist::{SimpleDistribution, TestingPair};
use crate::dpsprt::{DpSprt, DpSprtConfig};
use crate::eprocess::{
    build_schedule, stopping_time_lower_bound, stopping_time_numerator, ScheduledStatistic, SequentialTest,
    TwoSidedTest,
};
use crate::error::{Error, Result};
use crate::evar::{law_under, BoundedEVariable};
use crate::optimal::{solve_lambda_star, OptimalEVariable, DEFAULT_TOL};
use crate::par::map_trials;
use crate::privatize::{calibrate_with, release_values, PowerModel, ReleaseOptions};
use crate::seed::{derive_seed, tag};
use crate::tslr::TslrEVariable;

use super::config::{DistSpec, ExperimentConfig, Hypothesis, StatisticKind};
use super::ecdf::{median_stopping_time, write_paired_table, Ecdf};
use super::plot::{ecdf_svg, Series};
use super::records::{sort_records, write_records, TrialRecord};
use super::stream::PairedStream;

/// An e-variable for `pair` at budget `epsilon` with its e-power `E^Q[ln E]`.
pub fn build_statistic(
    kind: StatisticKind,
    pair: &TestingPair,
    epsilon: f64,
) -> Result<(Arc<dyn BoundedEVariable>, f64)> {
    match kind {
        StatisticKind::Optimal => {
            let e = OptimalEVariable::new(pair.clone(), epsilon)?;
            let mu = e.construction().rate;
            Ok((Arc::new(e), mu))
        }
        StatisticKind::Tslr => {
            let e = TslrEVariable::new(pair.clone(), epsilon)?;
            let mu = pair.alt().expect(|x| e.value(x).map(f64::ln).unwrap_or(f64::NAN))?.value;
            Ok((Arc::new(e), mu))
        }
    }
}

/// Two-sided test at total budget `epsilon` using `kind` on both sides.
pub fn two_sided(cfg: &ExperimentConfig, kind: StatisticKind, pair: &TestingPair, epsilon: f64) -> Result<TwoSidedTest> {
    if kind == StatisticKind::Optimal {
        return TwoSidedTest::optimal(pair, epsilon, cfg.rho, cfg.alpha, cfg.beta, cfg.max_n);
    }
    let half = epsilon / 2.0;
    let side = |p: &TestingPair| -> Result<ScheduledStatistic> {
        let (evar, mu) = build_statistic(kind, p, half)?;
        ScheduledStatistic::new(evar, half, mu, cfg.rho, cfg.max_n)
    };
    TwoSidedTest::with_statistics(side(pair)?, side(&pair.swapped()?)?, cfg.alpha, cfg.beta)
}

/// Location parameter reported in the `q` column.
fn location(spec: &str) -> f64 {
    match DistSpec::parse(spec) {
        Ok(DistSpec::Bernoulli { p }) => p,
        Ok(DistSpec::Gaussian { mu, .. }) => mu,
        _ => f64::NAN,
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), bytes)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub epsilon: f64,
    pub q: f64,
    pub median_eprocess: f64,
    pub median_dpsprt: f64,
    pub decided_eprocess: usize,
    pub decided_dpsprt: usize,
    pub error: Option<String>,
}

impl CellSummary {
    pub fn eprocess_wins(&self) -> bool {
        self.error.is_none() && self.median_eprocess < self.median_dpsprt
    }
}

#[derive(Debug, Clone)]
pub struct CompareResult {
    pub cells: Vec<CellSummary>,
    pub records: Vec<TrialRecord>,
    pub report: String,
}

impl CompareResult {
    /// Fraction of cells where the e-process has the smaller median `N`.
    pub fn dominance(&self) -> f64 {
        let wins = self.cells.iter().filter(|c| c.eprocess_wins()).count();
        wins as f64 / self.cells.len().max(1) as f64
    }
}

/// Paired comparison of the two-sided e-process and DP-SPRT on the ε × q grid.
/// Runs every trial in memory; see [`write_compare`] for the files.
pub fn run_compare(cfg: &ExperimentConfig) -> Result<CompareResult> {
    let null = cfg.null_dist()?;
    let mut cells = Vec::new();
    let mut records = Vec::new();
    for (ei, &eps) in cfg.epsilon_grid.iter().enumerate() {
        for (qi, &q) in cfg.q_grid.iter().enumerate() {
            let cell = (ei * cfg.q_grid.len() + qi) as u64;
            let alt = cfg.alt_at(q)?;
            let (rows, error) = match compare_cell(cfg, &null, &alt, eps, q, cell) {
                Ok(rows) => (rows, None),
                Err(e) => (Vec::new(), Some(e.to_string())),
            };
            let samples = |m: &str| -> Vec<(u64, bool)> {
                rows.iter().filter(|r| r.method == m).map(|r| (r.n, r.censored)).collect()
            };
            let (se, sd) = (samples("eprocess"), samples("dpsprt"));
            cells.push(CellSummary {
                epsilon: eps,
                q,
                median_eprocess: median_stopping_time(&se, cfg.max_n),
                median_dpsprt: median_stopping_time(&sd, cfg.max_n),
                decided_eprocess: se.iter().filter(|s| !s.1).count(),
                decided_dpsprt: sd.iter().filter(|s| !s.1).count(),
                error,
            });
            records.extend(rows);
        }
    }
    sort_records(&mut records);
    let report = compare_report(cfg, &cells);
    Ok(CompareResult { cells, records, report })
}

fn compare_cell(
    cfg: &ExperimentConfig,
    null: &SimpleDistribution,
    alt: &SimpleDistribution,
    eps: f64,
    q: f64,
    cell: u64,
) -> Result<Vec<TrialRecord>> {
    let pair = TestingPair::new(null.clone(), alt.clone())?;
    let eproc = two_sided(cfg, cfg.statistic, &pair, eps)?;
    let sprt = DpSprt::new(pair, DpSprtConfig::auto(eps, cfg.alpha, cfg.beta))?;
    let per_trial = map_trials(cfg.trials, |i| {
        let data_seed = derive_seed(cfg.seed, &[cell, i as u64, tag::DATA]);
        let mut stream = PairedStream::new(alt.clone(), data_seed);
        let a = eproc.run(&mut stream.replay(), cfg.max_n, derive_seed(cfg.seed, &[cell, i as u64, tag::EPROCESS_NOISE]));
        let b = sprt.run(&mut stream.replay(), cfg.max_n, derive_seed(cfg.seed, &[cell, i as u64, tag::DPSPRT_NOISE]));
        [
            TrialRecord::from_outcome("eprocess", eps, q, i, data_seed, &a, cfg.max_n),
            TrialRecord::from_outcome("dpsprt", eps, q, i, data_seed, &b, cfg.max_n),
        ]
    });
    Ok(per_trial.into_iter().flatten().collect())
}

fn compare_report(cfg: &ExperimentConfig, cells: &[CellSummary]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "paired comparison: two-sided e-process vs DP-SPRT");
    let _ = writeln!(
        s,
        "null = {}, alpha = {}, beta = {}, rho = {}, trials = {}, max_n = {}, seed = {}",
        cfg.null, cfg.alpha, cfg.beta, cfg.rho, cfg.trials, cfg.max_n, cfg.seed
    );
    let _ = writeln!(s, "{:>8} {:>6} {:>12} {:>12} {:>9} {:>9}  winner", "epsilon", "q", "median_e", "median_sprt", "decided_e", "decided_s");
    for c in cells {
        if let Some(e) = &c.error {
            let _ = writeln!(s, "{:>8} {:>6}  error: {e}", c.epsilon, c.q);
            continue;
        }
        let _ = writeln!(
            s,
            "{:>8} {:>6} {:>12} {:>12} {:>9} {:>9}  {}",
            c.epsilon,
            c.q,
            c.median_eprocess,
            c.median_dpsprt,
            c.decided_eprocess,
            c.decided_dpsprt,
            if c.eprocess_wins() { "eprocess" } else { "dpsprt" }
        );
    }
    let wins = cells.iter().filter(|c| c.eprocess_wins()).count();
    let _ = writeln!(s, "dominance: e-process median N smaller in {wins}/{} cells", cells.len());
    s
}

/// Writes `trials.csv`, one ECDF table per cell, one plot per `q` and
/// `report.txt`. Plot failures are noted in the report, not raised.
pub fn write_compare(cfg: &ExperimentConfig, result: &CompareResult) -> Result<()> {
    let dir = &cfg.output_dir;
    let mut buf = Vec::new();
    write_records(&mut buf, &result.records)?;
    write_file(dir, "trials.csv", &buf)?;

    let ecdf_of = |m: &str, eps: f64, q: f64| {
        Ecdf::new(
            result
                .records
                .iter()
                .filter(|r| r.method == m && r.epsilon == eps && r.q == q)
                .map(|r| (r.n, r.censored)),
        )
    };
    for c in &result.cells {
        let mut buf = Vec::new();
        write_paired_table(&mut buf, &ecdf_of("eprocess", c.epsilon, c.q), &ecdf_of("dpsprt", c.epsilon, c.q))?;
        write_file(dir, &format!("ecdf_{}_{}.csv", c.epsilon, c.q), &buf)?;
    }

    let mut report = result.report.clone();
    for &q in &cfg.q_grid {
        let curves: Vec<(f64, Ecdf, Ecdf)> =
            cfg.epsilon_grid.iter().map(|&e| (e, ecdf_of("eprocess", e, q), ecdf_of("dpsprt", e, q))).collect();
        let mut series = Vec::new();
        for (k, (e, a, b)) in curves.iter().enumerate() {
            series.push(Series { label: format!("e-process, eps={e}"), ecdf: a, dashed: false, color: k });
            series.push(Series { label: format!("DP-SPRT, eps={e}"), ecdf: b, dashed: true, color: k });
        }
        let svg = ecdf_svg(&format!("stopping-time ECDF, q = {q}"), &series, cfg.max_n);
        if let Err(e) = write_file(dir, &format!("plot_q{q}.svg"), svg.as_bytes()) {
            let _ = writeln!(report, "plot for q = {q} skipped: {e}");
        }
    }
    write_file(dir, "report.txt", report.as_bytes())
}

/// Two-sided e-process runs for the configured pair at each ε.
pub fn run_sequential(cfg: &ExperimentConfig) -> Result<(Vec<TrialRecord>, String)> {
    let pair = TestingPair::new(cfg.null_dist()?, cfg.alt_dist()?)?;
    let source = match cfg.sample_from {
        Hypothesis::Null => pair.null().clone(),
        Hypothesis::Alt => pair.alt().clone(),
    };
    let q = location(&cfg.alt);
    let mut records = Vec::new();
    let mut report = String::new();
    let _ = writeln!(report, "two-sided e-process: {} vs {}, data from {:?}", cfg.null, cfg.alt, cfg.sample_from);
    for (ei, &eps) in cfg.epsilon_grid.iter().enumerate() {
        let test = two_sided(cfg, cfg.statistic, &pair, eps)?;
        let rows = map_trials(cfg.trials, |i| {
            let data_seed = derive_seed(cfg.seed, &[ei as u64, i as u64, tag::DATA]);
            let mut stream = PairedStream::new(source.clone(), data_seed);
            let out = test.run(&mut stream.replay(), cfg.max_n, derive_seed(cfg.seed, &[ei as u64, i as u64, tag::EPROCESS_NOISE]));
            TrialRecord::from_outcome("eprocess", eps, q, i, data_seed, &out, cfg.max_n)
        });
        let samples: Vec<(u64, bool)> = rows.iter().map(|r| (r.n, r.censored)).collect();
        let count = |d: &str| rows.iter().filter(|r| r.decision == d).count();
        let _ = writeln!(
            report,
            "epsilon = {eps}: median N = {}, accept_q = {}, accept_p = {}, inconclusive = {}, errors = {}",
            median_stopping_time(&samples, cfg.max_n),
            count("accept_q"),
            count("accept_p"),
            count("inconclusive"),
            count("error")
        );
        records.extend(rows);
    }
    sort_records(&mut records);
    Ok((records, report))
}

pub fn write_sequential(cfg: &ExperimentConfig, records: &[TrialRecord], report: &str) -> Result<()> {
    let dir = &cfg.output_dir;
    let mut buf = Vec::new();
    write_records(&mut buf, records)?;
    write_file(dir, "trials.csv", &buf)?;
    for &eps in &cfg.epsilon_grid {
        let e = Ecdf::new(records.iter().filter(|r| r.epsilon == eps).map(|r| (r.n, r.censored)));
        let mut t = String::from("N,F_eprocess\n");
        for &n in e.support().iter().collect::<std::collections::BTreeSet<_>>() {
            let _ = writeln!(t, "{n},{}", e.eval(n));
        }
        write_file(dir, &format!("ecdf_{eps}.csv"), t.as_bytes())?;
    }
    write_file(dir, "report.txt", report.as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRow {
    pub epsilon: f64,
    pub trial: usize,
    pub log_e: f64,
    pub reject: bool,
}

/// Private batch e-values over `trials` datasets of size `n`.
pub fn run_batch(cfg: &ExperimentConfig) -> Result<(Vec<BatchRow>, String)> {
    let pair = TestingPair::new(cfg.null_dist()?, cfg.alt_dist()?)?;
    let source = match cfg.sample_from {
        Hypothesis::Null => pair.null().clone(),
        Hypothesis::Alt => pair.alt().clone(),
    };
    let threshold = (1.0 / cfg.alpha).ln();
    let mut rows = Vec::new();
    let mut report = String::new();
    for (ei, &eps) in cfg.epsilon_grid.iter().enumerate() {
        let (evar, mu) = build_statistic(cfg.statistic, &pair, eps)?;
        let model = match law_under(evar.as_ref(), pair.alt())? {
            Some(law) => PowerModel::Exact { law },
            None => PowerModel::ConcavityBound { mu },
        };
        let (lo, hi) = evar.range();
        let cal = calibrate_with(lo, hi, eps, cfg.n, &model)?;
        let out = map_trials(cfg.trials, |i| -> Result<BatchRow> {
            let mut stream = PairedStream::new(source.clone(), derive_seed(cfg.seed, &[ei as u64, i as u64, tag::DATA]));
            let values = stream.replay().take(cfg.n).map(|x| evar.value(x)).collect::<Result<Vec<_>>>()?;
            let seed = derive_seed(cfg.seed, &[ei as u64, i as u64, tag::BATCH_NOISE]);
            let r = release_values(&values, &cal, seed, ReleaseOptions::default())?;
            Ok(BatchRow { epsilon: eps, trial: i, log_e: r.log_evalue, reject: r.log_evalue >= threshold })
        });
        let out = out.into_iter().collect::<Result<Vec<_>>>()?;
        let rejected = out.iter().filter(|r| r.reject).count();
        let _ = writeln!(
            report,
            "epsilon = {eps}: statistic = {}, lambda = {:.6}, b = {:.6}, compensator = {:.6}, objective = {:.6}, rejected {rejected}/{}{}",
            evar.name(),
            cal.lambda,
            cal.b,
            cal.compensator,
            cal.objective,
            out.len(),
            if cal.is_low_noise() { " (low-noise regime: b < 1e-3)" } else { "" }
        );
        rows.extend(out);
    }
    Ok((rows, report))
}

pub fn batch_csv(rows: &[BatchRow]) -> String {
    let mut s = String::from("epsilon,trial,log_e,reject_at_alpha\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.epsilon, r.trial, r.log_e, r.reject);
    }
    s
}

/// Rate, stopping-time lower bound and the e-process's minimum time.
pub fn plan(cfg: &ExperimentConfig) -> Result<String> {
    let pair = TestingPair::new(cfg.null_dist()?, cfg.alt_dist()?)?;
    let mut s = String::new();
    let _ = writeln!(s, "null = {}, alt = {}, alpha = {}, beta = {}, rho = {}", cfg.null, cfg.alt, cfg.alpha, cfg.beta, cfg.rho);
    let _ = writeln!(s, "numerator = {}", stopping_time_numerator(cfg.alpha, cfg.beta));
    for &eps in &cfg.epsilon_grid {
        let c = solve_lambda_star(&pair, eps, DEFAULT_TOL)?;
        let bound = match stopping_time_lower_bound(cfg.alpha, cfg.beta, c.rate) {
            Ok(b) => b.to_string(),
            Err(Error::ZeroRate) => "infinite (zero rate)".into(),
            Err(e) => return Err(e),
        };
        let t1 = if c.rate > 0.0 {
            build_schedule(1.0, eps, c.rate, cfg.rho, 0)?.t1.to_string()
        } else {
            "infinite".into()
        };
        let _ = writeln!(s, "epsilon = {eps}: rate = {}, lower bound on E[N] = {bound}, t1 = {t1}", c.rate);
    }
    Ok(s)
}

pub fn batch_output(cfg: &ExperimentConfig, rows: &[BatchRow], report: &str) -> Result<()> {
    write_file(&cfg.output_dir, "batch.csv", batch_csv(rows).as_bytes())?;
    write_file(&cfg.output_dir, "report.txt", report.as_bytes())
}
