use thiserror::Error;

use crate::expr::ParseError;

/// Errors produced by the numerical routines and the run driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("grid functions or fields live on different domains")]
    DomainMismatch,

    #[error("invalid integrand: non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("modular equation did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("function vanishes identically")]
    ZeroFunction,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("under-resolved: {0}")]
    UnderResolved(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("unknown command: {0}")]
    UnknownCommand(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
