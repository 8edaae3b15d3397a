use thiserror::Error;

pub type Result<T> = std::result::Result<T, LearnError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error(transparent)]
    Core(#[from] lieopt_core::Error),

    #[error("momentum coefficient must lie in [0, 1), got {0}")]
    InvalidMomentum(f64),

    #[error("step index {step} exceeds schedule length {total}")]
    StepOutOfRange { step: usize, total: usize },

    #[error("{0}")]
    InvalidConfig(String),

    #[error("input has {got} features, network expects {expected}")]
    InputWidth { expected: usize, got: usize },

    #[error("parameter {index} must be positive under an active sign mask, got {value}")]
    MaskedNonPositive { index: usize, value: f64 },

    #[error("layer {layer} does not exist (network has {layers} layers)")]
    NoSuchLayer { layer: usize, layers: usize },

    #[error("empty {0}")]
    Empty(&'static str),
}
