use thiserror::Error;

pub type Result<T> = std::result::Result<T, OracleError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Core(#[from] lieopt_core::Error),

    #[error("oracle supports at most {max} dimensions, got {got}")]
    TooManyDimensions { max: usize, got: usize },

    #[error("{0}")]
    Unsupported(String),
}
