pub mod config;
pub mod error;
pub mod export;
pub mod idx;
pub mod metrics;
pub mod pgm;
pub mod state;
pub mod synth;
pub mod train;

pub use config::RunConfig;
pub use error::{HarnessError, Result};
