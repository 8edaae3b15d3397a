pub mod data;
pub mod error;
pub mod estimator;
pub mod net;
pub mod optimizer;

pub use data::Dataset;
pub use error::{LearnError, Result};
pub use estimator::{AffineConstants, Estimate, GradientProvider, MCConfig};
pub use optimizer::{apply_momentum, lr_schedule, Hyper, OptimizerState, Schedule};
