//! Seeded Monte Carlo experiments, their outputs, and the self-check suite.

pub mod config;
pub mod ecdf;
pub mod plot;
pub mod records;
pub mod run;
pub mod stream;
pub mod validate;

pub use config::{parse_distribution, DistSpec, ExperimentConfig, Hypothesis, Mode, RawConfig, StatisticKind};
pub use run::{run_batch, run_compare, run_sequential, CompareResult};
pub use validate::{run_validate, Fault, ValidationReport};
