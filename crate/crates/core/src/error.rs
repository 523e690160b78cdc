use thiserror::Error;

use crate::config::ConfigError;

/// Errors raised by the model, the solvers and the analysis drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("holding cost is not convex at x = {x}: increment {left} is followed by {right}")]
    NonConvexCost { x: usize, left: f64, right: f64 },

    #[error("invalid holding cost: {0}")]
    InvalidHoldingCost(String),

    #[error("tabular holding cost has no entry for x = {x} (table length {len})")]
    TabularOutOfRange { x: usize, len: usize },

    #[error("growth condition on the holding cost fails: {0}")]
    AssumptionViolated(String),

    #[error("invalid truncation: {0}")]
    InvalidTruncation(String),

    #[error("truncation too tight: {which} threshold {threshold} is within {margin} states of x_max = {x_max}")]
    TruncationTooTight {
        which: &'static str,
        threshold: String,
        margin: usize,
        x_max: usize,
    },

    #[error("value iteration did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("burden function is not nondecreasing at x = {x}: {left} > {right}")]
    NonMonotoneBurden { x: usize, left: f64, right: f64 },

    #[error("policy evaluation system is singular at row {0}")]
    SingularSystem(usize),

    #[error("policy is outside the truncation: {0}")]
    PolicyOutOfRange(String),

    #[error("no verdict change in the scanned reward range")]
    NoCrossingInRange,

    #[error("invalid scan: {0}")]
    InvalidScan(String),

    #[error("vanishing-discount sequence did not stabilize within {0} stages")]
    NotStabilized(usize),

    #[error("policy admits every arrival and the queue is unstable (lambda = {lambda} >= service rate {mu})")]
    UnstablePolicy { lambda: f64, mu: f64 },

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("csv error: {0}")]
    Csv(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
