//! Pure ε-differentially-private e-values and e-processes for testing a
//! simple null `P` against a simple alternate `Q`.
//!
//! The building blocks, roughly in dependency order:
//!
//! * [`dist`]: distributions, likelihood ratios and clipping-region masses.
//! * [`optimal`]: the log-optimal bounded e-variable `E*` and the private rate.
//! * [`tslr`]: the distribution-free truncated scaled likelihood ratio.
//! * [`privatize`]: Laplace-noised batch e-values.
//! * [`eprocess`]: batched private e-processes and sequential tests.
//! * [`dpsprt`]: a noisy-threshold SPRT baseline.
//! * [`harness`]: seeded Monte Carlo experiments and reports.

pub mod dist;
pub mod dpsprt;
pub mod eprocess;
pub mod error;
pub mod evar;
pub mod harness;
pub mod noise;
pub mod numeric;
pub mod optimal;
pub mod par;
pub mod privatize;
pub mod quad;
pub mod seed;
pub mod tslr;

pub use dist::{expect_under, likelihood_ratio, region_masses, Atom, SimpleDistribution, TestingPair};
pub use error::{Error, Result};
pub use evar::BoundedEVariable;
pub use optimal::{e_star, rate, solve_lambda_star, OptimalConstruction, OptimalEVariable};
pub use privatize::{calibrate, mixed_log_statistic, NoiseCalibration, PrivateBatchRelease};
pub use tslr::{tslr, tslr_extended, TslrEVariable, TslrStatistic};
