//! Trial rows and their CSV form.

use std::io::Write;

use serde::Serialize;

use crate::eprocess::SequentialOutcome;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub method: String,
    pub epsilon: f64,
    pub q: f64,
    pub trial: usize,
    pub decision: String,
    #[serde(rename = "N")]
    pub n: u64,
    pub log_e: Option<f64>,
    pub seed: u64,
    pub censored: bool,
}

impl TrialRecord {
    pub fn from_outcome(method: &str, epsilon: f64, q: f64, trial: usize, seed: u64, outcome: &Result<SequentialOutcome>, max_n: u64) -> Self {
        match outcome {
            Ok(o) => TrialRecord {
                method: method.into(),
                epsilon,
                q,
                trial,
                decision: o.decision.label().into(),
                n: if o.is_censored() { max_n } else { o.stopping_time },
                log_e: o.log_e,
                seed,
                censored: o.is_censored(),
            },
            Err(_) => TrialRecord {
                method: method.into(),
                epsilon,
                q,
                trial,
                decision: "error".into(),
                n: max_n,
                log_e: None,
                seed,
                censored: true,
            },
        }
    }
}

/// Sorts rows by `(method, epsilon, q, trial)`.
pub fn sort_records(rows: &mut [TrialRecord]) {
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.epsilon.total_cmp(&b.epsilon))
            .then(a.q.total_cmp(&b.q))
            .then(a.trial.cmp(&b.trial))
    });
}

pub fn write_records<W: Write>(out: W, rows: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_empty_log_e() {
        let rows = vec![TrialRecord {
            method: "dpsprt".into(),
            epsilon: 1.0,
            q: 0.7,
            trial: 0,
            decision: "accept_q".into(),
            n: 12,
            log_e: None,
            seed: 9,
            censored: false,
        }];
        let mut buf = Vec::new();
        write_records(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "method,epsilon,q,trial,decision,N,log_e,seed,censored\ndpsprt,1.0,0.7,0,accept_q,12,,9,false\n");
    }
}
