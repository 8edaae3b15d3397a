//! Fisher bilinear form `int h_1 h_2 / q` evaluated in parameter space.
//!
//! The tangent vector along `t -> q_{g exp(tV)}` is obtained from the
//! continuity equation `h = -div(q v)` with velocity `v(theta) = Ad_g V . theta`,
//! so `h / q = -(grad log q . v + div v)`.

use lieopt_core::differential::check_compatible;
use lieopt_core::quadrature::{integrate_nd, Axis, Domain, Tolerance};
use lieopt_core::{BaseDistribution, GroupElement, GroupKind, TangentVector};

use crate::error::{OracleError, Result};

pub const MAX_DIM: usize = 2;

pub const FISHER_TOL: Tolerance = Tolerance { abs: 1e-11, rel: 1e-11, max_evals: 1_000_000 };

/// Per-coordinate location/scale of `q_g`: `theta_i = scale_i * eps_i + shift_i`.
pub(crate) fn location_scale(g: &GroupElement) -> (Vec<f64>, Vec<f64>) {
    match g {
        GroupElement::Additive(b) => (vec![1.0; b.len()], b.clone()),
        GroupElement::Multiplicative(a) => (a.clone(), vec![0.0; a.len()]),
        GroupElement::DiagAffine { scale, shift } => (scale.clone(), shift.clone()),
    }
}

/// Integration axes in parameter space.
pub(crate) fn theta_axes(dist: &BaseDistribution, g: &GroupElement) -> Vec<Axis> {
    let (a, b) = location_scale(g);
    let (lo, hi) = dist.interval();
    a.iter()
        .zip(&b)
        .map(|(a, b)| {
            let breaks = dist.quadrature_breaks().iter().map(|x| a * x + b).collect();
            Axis::new(Domain::between(a * lo + b, a * hi + b), breaks)
        })
        .collect()
}

/// `q_g(theta)` for a mean-field base.
pub(crate) fn density(dist: &BaseDistribution, a: &[f64], b: &[f64], theta: &[f64]) -> f64 {
    theta
        .iter()
        .zip(a)
        .zip(b)
        .map(|((t, a), b)| dist.pdf((t - b) / a) / a)
        .product()
}

/// Basis of the Lie algebra; affine vectors are ordered `(X_1, y_1, X_2, y_2, ...)`.
pub fn basis(kind: GroupKind, d: usize) -> Vec<TangentVector> {
    let unit = |i: usize| {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    };
    match kind {
        GroupKind::Additive => (0..d).map(|i| TangentVector::Additive(unit(i))).collect(),
        GroupKind::Multiplicative => (0..d).map(|i| TangentVector::Multiplicative(unit(i))).collect(),
        GroupKind::DiagAffine => (0..d)
            .flat_map(|i| {
                [
                    TangentVector::DiagAffine { x: unit(i), y: vec![0.0; d] },
                    TangentVector::DiagAffine { x: vec![0.0; d], y: unit(i) },
                ]
            })
            .collect(),
    }
}

fn divergence(v: &TangentVector) -> f64 {
    match v {
        TangentVector::Additive(_) => 0.0,
        TangentVector::Multiplicative(x) | TangentVector::DiagAffine { x, .. } => x.iter().sum(),
    }
}

/// `h_V / q` at `theta`.
fn relative_tangent(
    dist: &BaseDistribution,
    g: &GroupElement,
    a: &[f64],
    b: &[f64],
    v: &TangentVector,
    theta: &[f64],
) -> Result<f64> {
    let vel = g.adjoint_act(v, theta)?;
    let mut transport = 0.0;
    for i in 0..theta.len() {
        if vel[i] != 0.0 {
            // d/dtheta_i log q = score(u_i) / a_i
            transport += dist.score((theta[i] - b[i]) / a[i])? / a[i] * vel[i];
        }
    }
    Ok(-(transport + divergence(v)))
}

fn check(dist: &BaseDistribution, g: &GroupElement) -> Result<()> {
    if !dist.is_smooth() {
        return Err(OracleError::Unsupported(format!("{} has no smooth density", dist.name())));
    }
    check_compatible(dist, g.kind())?;
    g.validate()?;
    if g.dim() > MAX_DIM {
        return Err(OracleError::TooManyDimensions { max: MAX_DIM, got: g.dim() });
    }
    Ok(())
}

/// Fisher matrix in the basis returned by [`basis`], row-major.
pub fn fisher_matrix_quadrature(dist: &BaseDistribution, g: &GroupElement) -> Result<Vec<Vec<f64>>> {
    check(dist, g)?;
    let (a, b) = location_scale(g);
    let axes = theta_axes(dist, g);
    let vs = basis(g.kind(), g.dim());
    let m = vs.len();
    let mut out = vec![vec![0.0; m]; m];
    for k in 0..m {
        for l in k..m {
            let integrand = |theta: &[f64]| {
                let q = density(dist, &a, &b, theta);
                if q == 0.0 {
                    return 0.0;
                }
                let rk = relative_tangent(dist, g, &a, &b, &vs[k], theta).unwrap_or(f64::NAN);
                let rl = relative_tangent(dist, g, &a, &b, &vs[l], theta).unwrap_or(f64::NAN);
                q * rk * rl
            };
            let value = integrate_nd(integrand, &axes, FISHER_TOL)?.value;
            out[k][l] = value;
            out[l][k] = value;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() < tol, "{a} vs {b}");
    }

    #[test]
    fn multiplicative_constants() {
        for g in [0.1, 1.0, 10.0] {
            let f = fisher_matrix_quadrature(&BaseDistribution::Rayleigh, &GroupElement::multiplicative(vec![g]).unwrap())
                .unwrap();
            close(f[0][0], 4.0, 1e-7);
        }
        let g = GroupElement::multiplicative(vec![0.7, 3.0]).unwrap();
        let f = fisher_matrix_quadrature(&BaseDistribution::Exponential, &g).unwrap();
        close(f[0][0], 1.0, 1e-7);
        close(f[1][1], 1.0, 1e-7);
        assert!(f[0][1].abs() < 1e-7, "{}", f[0][1]);
    }

    #[test]
    fn affine_blocks() {
        let g = GroupElement::diag_affine(vec![1.7], vec![-0.4]).unwrap();
        let f = fisher_matrix_quadrature(&BaseDistribution::Gaussian { sigma: 1.0 }, &g).unwrap();
        close(f[0][0], 2.0, 1e-7);
        close(f[0][1], 0.0, 1e-7);
        close(f[1][1], 1.0, 1e-7);
        let f = fisher_matrix_quadrature(&BaseDistribution::Cauchy, &g).unwrap();
        close(f[0][0], 0.5, 1e-7);
        close(f[1][1], 0.5, 1e-7);
        let f = fisher_matrix_quadrature(&BaseDistribution::Laplace { scale: 1.0 }, &g).unwrap();
        close(f[0][0], 1.0, 1e-6);
        close(f[1][1], 1.0, 1e-6);
    }

    #[test]
    fn additive_gaussian() {
        let g = GroupElement::additive(vec![0.3]).unwrap();
        let f = fisher_matrix_quadrature(&BaseDistribution::Gaussian { sigma: 0.5 }, &g).unwrap();
        close(f[0][0], 4.0, 1e-7);
    }

    #[test]
    fn rejects() {
        let g3 = GroupElement::multiplicative(vec![1.0; 3]).unwrap();
        assert!(matches!(
            fisher_matrix_quadrature(&BaseDistribution::Rayleigh, &g3),
            Err(OracleError::TooManyDimensions { .. })
        ));
        let g = GroupElement::additive(vec![0.0]).unwrap();
        assert!(fisher_matrix_quadrature(&BaseDistribution::Uniform { half_width: 1.0 }, &g).is_err());
        assert!(fisher_matrix_quadrature(&BaseDistribution::Rayleigh, &g).is_err());
    }
}
