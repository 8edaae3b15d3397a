use thiserror::Error;

use crate::group::GroupKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension must be at least 1")]
    EmptyDimension,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("group kind mismatch: expected {expected:?}, got {got:?}")]
    KindMismatch { expected: GroupKind, got: GroupKind },

    #[error("entry {index} must be strictly positive, got {value}")]
    NonPositive { index: usize, value: f64 },

    #[error("{value} lies outside the support of {dist}")]
    OutsideSupport { dist: String, value: f64 },

    #[error("{what} is not defined for {dist}")]
    Unsupported { dist: String, what: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: estimate {estimate}, error {error:e} after {evaluations} evaluations")]
    QuadratureNotConverged {
        estimate: f64,
        error: f64,
        evaluations: usize,
    },
}
