//! The verification suite run by `lieopt verify`.

use lieopt_core::differential::{energy_differential, entropy_term, QuadraticLoss};
use lieopt_core::{AffineFisher, BaseDistribution, GroupElement, TangentVector};

use crate::energy::finite_difference_energy;
use crate::exp_sinh::integrate_half_line;
use crate::fisher::fisher_matrix_quadrature;
use crate::gap::{halving_ratios, linearization_gap, GapProblem};
use crate::report::OracleReport;

pub const FISHER_TOL: f64 = 1e-6;
pub const LAPLACE_FISHER_TOL: f64 = 1e-5;
pub const BASE_POINT_TOL: f64 = 1e-6;
pub const OFF_DIAGONAL_TOL: f64 = 1e-7;
pub const ENTROPY_TOL: f64 = 1e-8;
pub const FINITE_DIFFERENCE_TOL: f64 = 1e-5;
pub const FINITE_DIFFERENCE_STEP: f64 = 1e-4;
pub const GAP_TOL: f64 = 1e-6;
pub const HALVING_TOL: f64 = 0.5;
pub const DUAL_QUADRATURE_TOL: f64 = 1e-8;

pub const HALVING_ALPHAS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

pub const RAYLEIGH_GAP_PROBLEM: GapProblem = GapProblem::Rayleigh { lambda: 1.0, m: 3.0, tau: 1.0 };
pub const GAUSSIAN_GAP_PROBLEM: GapProblem =
    GapProblem::GaussianQuadratic { curvature: 3.0, center: 0.0, scale: 1.0, shift: 2.0 };

/// Reference values the suite compares against. Tests corrupt a field to
/// check that the suite notices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedConstants {
    pub exponential_scale: f64,
    pub rayleigh_scale: f64,
    pub gaussian_affine: AffineFisher,
    pub cauchy_affine: AffineFisher,
    pub laplace_affine: AffineFisher,
    /// Rate gap after one step at `lambda = 1, m = 3, tau = 1, alpha = 0.01`.
    pub rayleigh_gap: f64,
}

impl Default for PublishedConstants {
    fn default() -> Self {
        PublishedConstants {
            exponential_scale: 1.0,
            rayleigh_scale: 4.0,
            gaussian_affine: AffineFisher { c_x: 2.0, b: 0.0, c_y: 1.0 },
            cauchy_affine: AffineFisher { c_x: 0.5, b: 0.0, c_y: 0.5 },
            laplace_affine: AffineFisher { c_x: 1.0, b: 0.0, c_y: 1.0 },
            rayleigh_gap: (0.04f64).exp() - 1.04,
        }
    }
}

fn mult(g: &[f64]) -> GroupElement {
    GroupElement::multiplicative(g.to_vec()).expect("positive literal")
}

fn fisher_scalar(name: &str, dist: &BaseDistribution, g: GroupElement, reference: f64, tol: f64) -> OracleReport {
    match fisher_matrix_quadrature(dist, &g) {
        Ok(f) => OracleReport::scalar(name, f[0][0], reference, tol),
        Err(e) => OracleReport::failed(name, tol, e),
    }
}

fn fisher_affine(name: &str, dist: &BaseDistribution, reference: AffineFisher, tol: f64) -> OracleReport {
    let g = GroupElement::diag_affine(vec![1.3], vec![-0.6]).expect("positive literal");
    match fisher_matrix_quadrature(dist, &g) {
        Ok(f) => OracleReport::compare(name, &[f[0][0], f[0][1], f[1][1]], &[reference.c_x, reference.b, reference.c_y], tol),
        Err(e) => OracleReport::failed(name, tol, e),
    }
}

fn fisher_checks(c: &PublishedConstants, out: &mut Vec<OracleReport>) {
    out.push(fisher_scalar(
        "fisher.multiplicative.exponential",
        &BaseDistribution::Exponential,
        mult(&[1.0]),
        c.exponential_scale,
        FISHER_TOL,
    ));
    out.push(fisher_scalar(
        "fisher.multiplicative.rayleigh",
        &BaseDistribution::Rayleigh,
        mult(&[1.0]),
        c.rayleigh_scale,
        FISHER_TOL,
    ));

    let name = "fisher.multiplicative.rayleigh.base_point";
    let values: Result<Vec<f64>, _> = [0.1, 1.0, 10.0]
        .iter()
        .map(|&g| fisher_matrix_quadrature(&BaseDistribution::Rayleigh, &mult(&[g])).map(|f| f[0][0]))
        .collect();
    out.push(match values {
        Ok(v) => OracleReport::compare(name, &v, &[v[1]; 3], BASE_POINT_TOL),
        Err(e) => OracleReport::failed(name, BASE_POINT_TOL, e),
    });

    let name = "fisher.multiplicative.exponential.diagonal_2d";
    out.push(match fisher_matrix_quadrature(&BaseDistribution::Exponential, &mult(&[0.5, 4.0])) {
        Ok(f) => OracleReport::compare(name, &[f[0][1], f[1][0]], &[0.0, 0.0], OFF_DIAGONAL_TOL),
        Err(e) => OracleReport::failed(name, OFF_DIAGONAL_TOL, e),
    });

    out.push(fisher_affine("fisher.affine.gaussian", &BaseDistribution::Gaussian { sigma: 1.0 }, c.gaussian_affine, FISHER_TOL));
    out.push(fisher_affine("fisher.affine.cauchy", &BaseDistribution::Cauchy, c.cauchy_affine, FISHER_TOL));
    out.push(fisher_affine(
        "fisher.affine.laplace",
        &BaseDistribution::Laplace { scale: 1.0 },
        c.laplace_affine,
        LAPLACE_FISHER_TOL,
    ));
}

/// The library's closed-form constants against parameter-space quadrature.
fn analytic_constant_checks(out: &mut Vec<OracleReport>) {
    let g_add = GroupElement::additive(vec![0.4]).expect("literal");
    for dist in [BaseDistribution::Gaussian { sigma: 0.5 }, BaseDistribution::Laplace { scale: 2.0 }] {
        let name = format!("analytic.additive.{}", dist.name());
        out.push(match dist.fisher_constant_additive().map(|c| c.value()) {
            Ok(Some(c)) => fisher_scalar(&name, &dist, g_add.clone(), c, FISHER_TOL),
            Ok(None) => OracleReport::failed(&name, FISHER_TOL, "no closed form"),
            Err(e) => OracleReport::failed(&name, FISHER_TOL, e),
        });
    }
    for dist in [
        BaseDistribution::Exponential,
        BaseDistribution::Rayleigh,
        BaseDistribution::LogNormal { mu: 0.2, sigma: 0.7 },
    ] {
        let name = format!("analytic.multiplicative.{}", dist.name());
        out.push(match dist.fisher_constant_multiplicative().map(|c| c.value()) {
            Ok(Some(c)) => fisher_scalar(&name, &dist, mult(&[2.5]), c, FISHER_TOL),
            Ok(None) => OracleReport::failed(&name, FISHER_TOL, "no closed form"),
            Err(e) => OracleReport::failed(&name, FISHER_TOL, e),
        });
    }
    for (dist, tol) in [
        (BaseDistribution::Gaussian { sigma: 1.5 }, FISHER_TOL),
        (BaseDistribution::Laplace { scale: 0.5 }, LAPLACE_FISHER_TOL),
        (BaseDistribution::Cauchy, FISHER_TOL),
    ] {
        let name = format!("analytic.affine.{}", dist.name());
        out.push(match dist.fisher_constants_affine().map(|c| c.value()) {
            Ok(Some(c)) => fisher_affine(&name, &dist, c, tol),
            Ok(None) => OracleReport::failed(&name, tol, "no closed form"),
            Err(e) => OracleReport::failed(&name, tol, e),
        });
    }
}

/// Log-normal scale constant by two quadrature schemes and in closed form.
fn lognormal_dual_check(out: &mut Vec<OracleReport>) {
    let name = "fisher.multiplicative.lognormal.dual_quadrature";
    let sigma = 0.7;
    let dist = BaseDistribution::LogNormal { mu: 0.2, sigma };
    let gk = match fisher_matrix_quadrature(&dist, &mult(&[1.0])) {
        Ok(f) => f[0][0],
        Err(e) => {
            out.push(OracleReport::failed(name, DUAL_QUADRATURE_TOL, e));
            return;
        }
    };
    let (de, _) = integrate_half_line(
        |x| match dist.score(x) {
            Ok(s) => dist.pdf(x) * (1.0 + x * s).powi(2),
            Err(_) => 0.0,
        },
        1e-14,
        12,
    );
    out.push(OracleReport::compare(name, &[gk, de], &[1.0 / (sigma * sigma); 2], DUAL_QUADRATURE_TOL));
}

fn entropy_checks(out: &mut Vec<OracleReport>) {
    for dist in [BaseDistribution::Gaussian { sigma: 1.0 }, BaseDistribution::Laplace { scale: 1.0 }] {
        let name = format!("entropy.additive.{}", dist.name());
        out.push(match entropy_term(&dist, &TangentVector::Additive(vec![1.0])) {
            Ok(v) => OracleReport::scalar(&name, v, 0.0, ENTROPY_TOL),
            Err(e) => OracleReport::failed(&name, ENTROPY_TOL, e),
        });
    }
    for dist in [BaseDistribution::Exponential, BaseDistribution::Rayleigh] {
        let name = format!("entropy.multiplicative.{}", dist.name());
        out.push(match entropy_term(&dist, &TangentVector::Multiplicative(vec![1.0])) {
            Ok(v) => OracleReport::scalar(&name, v, -1.0, ENTROPY_TOL),
            Err(e) => OracleReport::failed(&name, ENTROPY_TOL, e),
        });
    }
}

fn differential_checks(out: &mut Vec<OracleReport>) {
    let loss = QuadraticLoss::half_square();
    let cases = [
        (
            "differential.multiplicative.rayleigh",
            BaseDistribution::Rayleigh,
            mult(&[1.0]),
            TangentVector::Multiplicative(vec![1.0]),
        ),
        (
            "differential.additive.gaussian",
            BaseDistribution::Gaussian { sigma: 1.0 },
            GroupElement::additive(vec![0.5]).expect("literal"),
            TangentVector::Additive(vec![1.0]),
        ),
    ];
    for (name, dist, g, x) in cases {
        let formula = energy_differential(&dist, &g, &loss, 1.0, &x);
        let fd = finite_difference_energy(&dist, &g, &loss, 1.0, &x, FINITE_DIFFERENCE_STEP);
        out.push(match (formula, fd) {
            (Ok(v), Ok(r)) => OracleReport::scalar(name, v, r, FINITE_DIFFERENCE_TOL),
            (Err(e), _) => OracleReport::failed(name, FINITE_DIFFERENCE_TOL, e),
            (_, Err(e)) => OracleReport::failed(name, FINITE_DIFFERENCE_TOL, e),
        });
    }
}

fn gap_checks(c: &PublishedConstants, out: &mut Vec<OracleReport>) {
    out.push(OracleReport::scalar(
        "linearization.rayleigh.scalar",
        linearization_gap(RAYLEIGH_GAP_PROBLEM, 0.01),
        c.rayleigh_gap,
        GAP_TOL,
    ));
    for (name, p) in [
        ("linearization.rayleigh.halving", RAYLEIGH_GAP_PROBLEM),
        ("linearization.gaussian.halving", GAUSSIAN_GAP_PROBLEM),
    ] {
        let r = halving_ratios(p, &HALVING_ALPHAS);
        out.push(OracleReport::compare(name, &r, &vec![4.0; r.len()], HALVING_TOL));
    }
}

/// Every check, ordered by name.
pub fn run_checks(constants: &PublishedConstants) -> Vec<OracleReport> {
    let mut out = Vec::new();
    fisher_checks(constants, &mut out);
    analytic_constant_checks(&mut out);
    lognormal_dual_check(&mut out);
    entropy_checks(&mut out);
    differential_checks(&mut out);
    gap_checks(constants, &mut out);
    out.sort_by(|a, b| a.name.cmp(&b.name));
    out
}

pub fn verify_suite() -> Vec<OracleReport> {
    run_checks(&PublishedConstants::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let reports = verify_suite();
        for r in &reports {
            assert!(r.pass, "{r}");
        }
        assert!(reports.len() >= 20);
    }

    #[test]
    fn corrupted_constant_is_caught() {
        let bad = PublishedConstants { rayleigh_scale: 4.5, ..PublishedConstants::default() };
        let reports = run_checks(&bad);
        let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
        assert_eq!(failed, vec!["fisher.multiplicative.rayleigh"]);
    }
}
