use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid config: {0}")]
    Invalid(String),

    #[error("{path}: bad magic number {got:#010x}, expected {expected:#010x}")]
    BadMagic { path: PathBuf, expected: u32, got: u32 },

    #[error("{path}: truncated payload, expected {expected} bytes but found {got}")]
    Truncated { path: PathBuf, expected: usize, got: usize },

    #[error("image file holds {images} examples but label file holds {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("{path}: malformed {what}: {detail}")]
    Format { path: PathBuf, what: &'static str, detail: String },

    #[error("non-finite value at epoch {epoch}, step {step}; state dumped to {dump}")]
    NonFinite { epoch: usize, step: usize, dump: String },

    #[error("scale parameter left the positive orthant at epoch {epoch} (min {min})")]
    Positivity { epoch: usize, min: f64 },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Learn(#[from] lieopt_learn::LearnError),

    #[error(transparent)]
    Core(#[from] lieopt_core::Error),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}
