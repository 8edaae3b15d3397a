//! Core geometry for variational learning over Lie-group parameterizations.
//!
//! * [`group`]: translations, positive scalings and the diagonal affine group,
//!   with their exponential maps and adjoint actions.
//! * [`base_dist`]: the fixed mean-field base densities and Fisher constants.
//! * [`quadrature`]: adaptive Gauss–Kronrod integration on (semi-)infinite ranges.
//! * [`differential`]: closed-form (quadrature) differentials of the free energy.
//! * [`exec`]: the sequential / rayon execution switch used across the workspace.

pub mod base_dist;
pub mod differential;
pub mod error;
pub mod exec;
pub mod group;
pub mod quadrature;

pub use base_dist::{noise_rng, AffineFisher, BaseDistribution, FisherConstant, Support};
pub use error::{Error, Result};
pub use exec::Execution;
pub use group::{GroupElement, GroupKind, TangentVector};
