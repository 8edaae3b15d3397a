//! Free energy `E(q) = E_q[loss] + tau int q log q`, with the Gibbs normalizer
//! dropped, and its central difference along a group path.

use lieopt_core::differential::ClosedFormLoss;
use lieopt_core::quadrature::{integrate_nd, Tolerance};
use lieopt_core::{BaseDistribution, GroupElement, TangentVector};

use crate::error::{OracleError, Result};
use crate::fisher::{density, location_scale, theta_axes, MAX_DIM};

pub const ENERGY_TOL: Tolerance = Tolerance { abs: 1e-13, rel: 1e-14, max_evals: 1_000_000 };

pub fn energy_by_quadrature(
    dist: &BaseDistribution,
    g: &GroupElement,
    loss: &dyn ClosedFormLoss,
    tau: f64,
) -> Result<f64> {
    if !dist.has_density() {
        return Err(OracleError::Unsupported(format!("{} has no density", dist.name())));
    }
    lieopt_core::differential::check_compatible(dist, g.kind())?;
    if g.dim() > MAX_DIM {
        return Err(OracleError::TooManyDimensions { max: MAX_DIM, got: g.dim() });
    }
    let (a, b) = location_scale(g);
    let integrand = |theta: &[f64]| {
        let q = density(dist, &a, &b, theta);
        if q == 0.0 {
            return 0.0;
        }
        q * (loss.value(theta) + tau * q.ln())
    };
    Ok(integrate_nd(integrand, &theta_axes(dist, g), ENERGY_TOL)?.value)
}

/// `[E(g exp(tX)) - E(g exp(-tX))] / (2t)`.
pub fn finite_difference_energy(
    dist: &BaseDistribution,
    g: &GroupElement,
    loss: &dyn ClosedFormLoss,
    tau: f64,
    x: &TangentVector,
    t: f64,
) -> Result<f64> {
    if x.norm() == 0.0 {
        return Ok(0.0);
    }
    let plus = g.compose(&x.scaled(t).exp())?;
    let minus = g.compose(&x.scaled(-t).exp())?;
    Ok((energy_by_quadrature(dist, &plus, loss, tau)? - energy_by_quadrature(dist, &minus, loss, tau)?) / (2.0 * t))
}
