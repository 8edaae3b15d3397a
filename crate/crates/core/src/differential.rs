//! Quadrature evaluation of the differential of the free energy
//! `E(q) = E_q[loss] - tau * H(q)` along the orbit `t -> q_{g exp(tV)}`.
//!
//! The differential splits into a loss term
//! `int q_g(theta) grad loss(theta) . (Ad_g V . theta) dtheta`
//! and an entropy term `int grad q0(theta) . (V . theta) dtheta`, combined as
//! `loss_term + tau * entropy_term`. Both are integrated over the base density
//! after the change of variables `theta = g . eps`, so no sampling is involved.

use crate::base_dist::{BaseDistribution, Support};
use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupKind, TangentVector};
use crate::quadrature::{integrate, integrate_nd, Axis, Tolerance};

/// Largest dimension handled by tensor-product quadrature.
pub const MAX_QUADRATURE_DIM: usize = 3;

pub const DIFFERENTIAL_TOL: Tolerance = Tolerance {
    abs: 1e-10,
    rel: 1e-10,
    max_evals: 2_000_000,
};

/// A loss with closed-form value and gradient.
pub trait ClosedFormLoss: Sync {
    fn value(&self, theta: &[f64]) -> f64;
    fn gradient(&self, theta: &[f64]) -> Vec<f64>;
}

/// `0.5 * curvature * |theta - center|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticLoss {
    pub curvature: f64,
    pub center: f64,
}

impl QuadraticLoss {
    /// `0.5 * |theta|^2`.
    pub fn half_square() -> Self {
        QuadraticLoss { curvature: 1.0, center: 0.0 }
    }
}

impl ClosedFormLoss for QuadraticLoss {
    fn value(&self, theta: &[f64]) -> f64 {
        0.5 * self.curvature * theta.iter().map(|t| (t - self.center).powi(2)).sum::<f64>()
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().map(|t| self.curvature * (t - self.center)).collect()
    }
}

/// Checks that `dist` can be pushed forward by groups of `kind`.
pub fn check_compatible(dist: &BaseDistribution, kind: GroupKind) -> Result<()> {
    let ok = match (dist.support(), kind) {
        (Support::Point, _) => true,
        (Support::PositiveHalfLine, GroupKind::Multiplicative) => true,
        (Support::RealLine, GroupKind::Additive | GroupKind::DiagAffine) => true,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Unsupported {
            dist: dist.name(),
            what: match kind {
                GroupKind::Multiplicative => "the multiplicative group (needs positive support)",
                _ => "translations (needs full-line support)",
            },
        })
    }
}

fn check_problem(dist: &BaseDistribution, g: &GroupElement, v: &TangentVector) -> Result<()> {
    if !dist.has_density() {
        return Err(Error::Unsupported { dist: dist.name(), what: "energy differential" });
    }
    check_compatible(dist, g.kind())?;
    if g.kind() != v.kind() {
        return Err(Error::KindMismatch { expected: g.kind(), got: v.kind() });
    }
    if g.dim() != v.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), got: v.dim() });
    }
    if g.dim() > MAX_QUADRATURE_DIM {
        return Err(Error::InvalidParameter(format!(
            "quadrature differential supports at most {MAX_QUADRATURE_DIM} dimensions, got {}",
            g.dim()
        )));
    }
    Ok(())
}

/// Loss term `int q_g (grad loss)^T (Ad_g V . theta)`.
pub fn loss_term(
    dist: &BaseDistribution,
    g: &GroupElement,
    loss: &dyn ClosedFormLoss,
    v: &TangentVector,
) -> Result<f64> {
    check_problem(dist, g, v)?;
    let axes: Vec<Axis> = (0..g.dim())
        .map(|_| Axis::new(dist.domain(), dist.quadrature_breaks()))
        .collect();
    let integrand = |eps: &[f64]| {
        let density: f64 = eps.iter().map(|&e| dist.pdf(e)).product();
        if density == 0.0 {
            return 0.0;
        }
        let theta = match g.act(eps) {
            Ok(t) => t,
            Err(_) => return 0.0,
        };
        let grad = loss.gradient(&theta);
        let dir = g.adjoint_act(v, &theta).expect("dimensions checked");
        density * grad.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>()
    };
    integrate_nd(integrand, &axes, DIFFERENTIAL_TOL).map(|r| r.value)
}

/// Entropy term `int (grad q0)^T (V . theta)`. Mean-field densities reduce it
/// to one-dimensional integrals per coordinate.
pub fn entropy_term(dist: &BaseDistribution, v: &TangentVector) -> Result<f64> {
    if !dist.has_density() {
        return Err(Error::Unsupported { dist: dist.name(), what: "entropy differential" });
    }
    check_compatible(dist, v.kind())?;
    let tol = DIFFERENTIAL_TOL;
    let moment = |power: i32| {
        integrate(
            |x| x.powi(power) * dist.pdf_derivative(x),
            dist.domain(),
            &dist.quadrature_breaks(),
            tol,
        )
        .map(|r| r.value)
    };
    Ok(match v {
        TangentVector::Additive(x) => moment(0)? * x.iter().sum::<f64>(),
        TangentVector::Multiplicative(x) => moment(1)? * x.iter().sum::<f64>(),
        TangentVector::DiagAffine { x, y } => {
            moment(1)? * x.iter().sum::<f64>() + moment(0)? * y.iter().sum::<f64>()
        }
    })
}

/// `dE(q_g)[h_V] = loss_term + tau * entropy_term`.
pub fn energy_differential(
    dist: &BaseDistribution,
    g: &GroupElement,
    loss: &dyn ClosedFormLoss,
    tau: f64,
    v: &TangentVector,
) -> Result<f64> {
    Ok(loss_term(dist, g, loss, v)? + tau * entropy_term(dist, v)?)
}
