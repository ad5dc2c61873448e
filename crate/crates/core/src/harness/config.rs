//! Experiment configuration: a flat TOML file, optionally overridden by CLI
//! flags, validated into an [`ExperimentConfig`].

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::{Atom, SimpleDistribution};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rate,
    Batch,
    Sequential,
    Compare,
    Validate,
    Plan,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "rate" => Mode::Rate,
            "batch" => Mode::Batch,
            "sequential" => Mode::Sequential,
            "compare" => Mode::Compare,
            "validate" => Mode::Validate,
            "plan" => Mode::Plan,
            _ => return Err(Error::Config(format!("unknown mode `{s}`"))),
        })
    }
}

/// Bounded e-variable used by the batch privatizer and the e-process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StatisticKind {
    #[default]
    Optimal,
    Tslr,
}

impl FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" => Ok(StatisticKind::Optimal),
            "tslr" => Ok(StatisticKind::Tslr),
            _ => Err(Error::Config(format!("unknown statistic `{s}` (expected optimal or tslr)"))),
        }
    }
}

/// Which hypothesis generates the data in `batch` and `sequential` modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    Null,
    #[default]
    Alt,
}

impl FromStr for Hypothesis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "null" => Ok(Hypothesis::Null),
            "alt" => Ok(Hypothesis::Alt),
            _ => Err(Error::Config(format!("unknown hypothesis `{s}` (expected null or alt)"))),
        }
    }
}

/// Config as written on disk; every field optional so that files and flags
/// can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub mode: Option<Mode>,
    pub null: Option<String>,
    pub alt: Option<String>,
    pub epsilon_grid: Option<Vec<f64>>,
    pub q_grid: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub rho: Option<f64>,
    pub trials: Option<usize>,
    pub max_n: Option<u64>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub statistic: Option<StatisticKind>,
    /// Batch size for `batch` mode.
    pub n: Option<usize>,
    /// Monte Carlo trials per check in `validate` mode.
    pub mc_trials: Option<usize>,
    pub sample_from: Option<Hypothesis>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(self, other: RawConfig) -> RawConfig {
        RawConfig {
            mode: other.mode.or(self.mode),
            null: other.null.or(self.null),
            alt: other.alt.or(self.alt),
            epsilon_grid: other.epsilon_grid.or(self.epsilon_grid),
            q_grid: other.q_grid.or(self.q_grid),
            alpha: other.alpha.or(self.alpha),
            beta: other.beta.or(self.beta),
            rho: other.rho.or(self.rho),
            trials: other.trials.or(self.trials),
            max_n: other.max_n.or(self.max_n),
            seed: other.seed.or(self.seed),
            output_dir: other.output_dir.or(self.output_dir),
            statistic: other.statistic.or(self.statistic),
            n: other.n.or(self.n),
            mc_trials: other.mc_trials.or(self.mc_trials),
            sample_from: other.sample_from.or(self.sample_from),
        }
    }

    pub fn finish(self) -> Result<ExperimentConfig> {
        let d = ExperimentConfig::default();
        let cfg = ExperimentConfig {
            mode: self.mode.unwrap_or(d.mode),
            null: self.null.unwrap_or(d.null),
            alt: self.alt.unwrap_or(d.alt),
            epsilon_grid: self.epsilon_grid.unwrap_or(d.epsilon_grid),
            q_grid: self.q_grid.unwrap_or(d.q_grid),
            alpha: self.alpha.unwrap_or(d.alpha),
            beta: self.beta.unwrap_or(d.beta),
            rho: self.rho.unwrap_or(d.rho),
            trials: self.trials.unwrap_or(d.trials),
            max_n: self.max_n.unwrap_or(d.max_n),
            seed: self.seed.unwrap_or(d.seed),
            output_dir: self.output_dir.unwrap_or(d.output_dir),
            statistic: self.statistic.unwrap_or(d.statistic),
            n: self.n.unwrap_or(d.n),
            mc_trials: self.mc_trials.unwrap_or(d.mc_trials),
            sample_from: self.sample_from.unwrap_or(d.sample_from),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub null: String,
    pub alt: String,
    pub epsilon_grid: Vec<f64>,
    pub q_grid: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub trials: usize,
    pub max_n: u64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub statistic: StatisticKind,
    pub n: usize,
    pub mc_trials: usize,
    pub sample_from: Hypothesis,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Compare,
            null: "bernoulli p=0.3".into(),
            alt: "bernoulli p=0.7".into(),
            epsilon_grid: vec![0.5, 1.0, 2.0, 5.0],
            q_grid: vec![0.5, 0.6, 0.7, 0.9],
            alpha: 1.0 / 40.0,
            beta: 1.0 / 40.0,
            rho: 3.0,
            trials: 100,
            max_n: 100_000,
            seed: 20240601,
            output_dir: PathBuf::from("out"),
            statistic: StatisticKind::Optimal,
            n: 50,
            mc_trials: 20_000,
            sample_from: Hypothesis::Alt,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.epsilon_grid.is_empty() || self.q_grid.is_empty() {
            return bad("grids must be nonempty".into());
        }
        if let Some(e) = self.epsilon_grid.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return bad(format!("epsilon {e} must be positive"));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} = {v} must lie in (0, 1)"));
            }
        }
        if !(self.rho > 1.0) {
            return bad(format!("rho = {} must exceed 1", self.rho));
        }
        if self.max_n == 0 || self.n == 0 || self.mc_trials == 0 {
            return bad("max_n, n and mc_trials must be positive".into());
        }
        parse_distribution(&self.null)?;
        parse_distribution(&self.alt)?;
        Ok(())
    }

    pub fn null_dist(&self) -> Result<SimpleDistribution> {
        parse_distribution(&self.null)
    }

    pub fn alt_dist(&self) -> Result<SimpleDistribution> {
        parse_distribution(&self.alt)
    }

    /// Alternate obtained by moving the null's location parameter to `q`:
    /// the success probability for Bernoulli nulls, the mean for Gaussians.
    pub fn alt_at(&self, q: f64) -> Result<SimpleDistribution> {
        match DistSpec::parse(&self.null)? {
            DistSpec::Bernoulli { .. } => SimpleDistribution::bernoulli(q),
            DistSpec::Gaussian { sigma, .. } => SimpleDistribution::gaussian(q, sigma),
            DistSpec::Finite { .. } => Err(Error::Config("q_grid needs a bernoulli or gaussian null".into())),
        }
    }
}

/// Parsed distribution spec, e.g. `bernoulli p=0.3`, `gaussian mu=0 sigma=1`,
/// `finite atoms=[0:0.2, 1:0.5, 2:0.3]`.
#[derive(Debug, Clone, PartialEq)]
pub enum DistSpec {
    Bernoulli { p: f64 },
    Gaussian { mu: f64, sigma: f64 },
    Finite { atoms: Vec<Atom> },
}

impl DistSpec {
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (name, rest) = spec.split_once(char::is_whitespace).unwrap_or((spec, ""));
        let err = |m: &str| Error::Config(format!("distribution `{spec}`: {m}"));
        if name == "finite" {
            let body = rest
                .trim()
                .strip_prefix("atoms=")
                .and_then(|s| s.trim().strip_prefix('['))
                .and_then(|s| s.trim_end().strip_suffix(']'))
                .ok_or_else(|| err("expected atoms=[x:p, ...]"))?;
            let atoms = body
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|item| {
                    let (x, p) = item.split_once(':').ok_or_else(|| err("atom must be x:p"))?;
                    Ok(Atom { point: num(x, spec)?, prob: num(p, spec)? })
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(DistSpec::Finite { atoms });
        }
        let mut kv = Vec::new();
        for tok in rest.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| err("expected key=value"))?;
            kv.push((k, num(v, spec)?));
        }
        let get = |key: &str| kv.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        if let Some((k, _)) = kv.iter().find(|(k, _)| !matches!((name, *k), ("bernoulli", "p") | ("gaussian", "mu" | "sigma"))) {
            return Err(err(&format!("unknown parameter `{k}`")));
        }
        match name {
            "bernoulli" => Ok(DistSpec::Bernoulli { p: get("p").ok_or_else(|| err("missing p"))? }),
            "gaussian" => Ok(DistSpec::Gaussian { mu: get("mu").unwrap_or(0.0), sigma: get("sigma").unwrap_or(1.0) }),
            _ => Err(err("unknown family")),
        }
    }

    pub fn build(&self) -> Result<SimpleDistribution> {
        match self {
            DistSpec::Bernoulli { p } => SimpleDistribution::bernoulli(*p),
            DistSpec::Gaussian { mu, sigma } => SimpleDistribution::gaussian(*mu, *sigma),
            DistSpec::Finite { atoms } => SimpleDistribution::finite(format!("finite({} atoms)", atoms.len()), atoms.clone()),
        }
    }
}

fn num(s: &str, spec: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Config(format!("distribution `{spec}`: `{s}` is not a number")))
}

pub fn parse_distribution(spec: &str) -> Result<SimpleDistribution> {
    DistSpec::parse(spec)?.build().map_err(|e| Error::Config(e.to_string()))
}
