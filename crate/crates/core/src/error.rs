use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("null density is zero at x = {x} (alternate density {alt_density})")]
    ZeroNullDensity { x: f64, alt_density: f64 },

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("no root in bracket [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoRootInBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("e-value {value} outside certified range [{lo}, {hi}]")]
    RangeViolation { value: f64, lo: f64, hi: f64 },

    #[error("no mixing weight in (0, 1) gives log-sensitivity below epsilon = {epsilon}")]
    InfeasibleNoise { epsilon: f64 },

    #[error("per-sample power must be positive, got {0}")]
    NonpositivePower(f64),

    #[error("competitive ratio rho = {rho} must exceed max(1, c) with c = {c}")]
    InvalidRho { rho: f64, c: f64 },

    #[error("rate is zero: the alternate cannot be distinguished from the null")]
    ZeroRate,

    #[error("log-likelihood ratio is unbounded and no clip level is configured")]
    UnboundedLlr,

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
