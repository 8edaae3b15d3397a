//! Quadrature and closed-form reference computations. This crate depends on
//! the core types only and never on the Monte-Carlo estimators.

pub mod blr;
pub mod checks;
pub mod energy;
pub mod error;
pub mod exp_sinh;
pub mod fisher;
pub mod gap;
pub mod report;

pub use checks::{run_checks, verify_suite, PublishedConstants};
pub use error::{OracleError, Result};
pub use report::{to_csv, OracleReport};
