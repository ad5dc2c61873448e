//! Empirical CDFs of stopping times.

use std::io::Write;

use crate::error::Result;

/// Right-continuous ECDF of stopping times. Censored trials are in the
/// denominator but never counted as stopped, so `F` may end below 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    stopped: Vec<u64>,
    total: usize,
}

impl Ecdf {
    /// `samples` are `(N, censored)` pairs.
    pub fn new(samples: impl IntoIterator<Item = (u64, bool)>) -> Self {
        let mut total = 0;
        let mut stopped = Vec::new();
        for (n, censored) in samples {
            total += 1;
            if !censored {
                stopped.push(n);
            }
        }
        stopped.sort_unstable();
        Ecdf { stopped, total }
    }

    /// `F(n) = #{stopped with N <= n} / total`.
    pub fn eval(&self, n: u64) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.stopped.partition_point(|&v| v <= n) as f64 / self.total as f64
    }

    pub fn support(&self) -> &[u64] {
        &self.stopped
    }
}

/// Median stopping time with censored trials counted at `max_n`.
pub fn median_stopping_time(samples: &[(u64, bool)], max_n: u64) -> f64 {
    let mut v: Vec<u64> = samples.iter().map(|&(n, c)| if c { max_n } else { n }).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_unstable();
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m] as f64
    } else {
        (v[m - 1] as f64 + v[m] as f64) / 2.0
    }
}

/// Table with one row per distinct stopping time of either method.
pub fn write_paired_table<W: Write>(mut out: W, eprocess: &Ecdf, dpsprt: &Ecdf) -> Result<()> {
    let mut grid: Vec<u64> = eprocess.support().iter().chain(dpsprt.support()).copied().collect();
    grid.sort_unstable();
    grid.dedup();
    writeln!(out, "N,F_eprocess,F_dpsprt")?;
    for n in grid {
        writeln!(out, "{n},{},{}", eprocess.eval(n), dpsprt.eval(n))?;
    }
    Ok(())
}
