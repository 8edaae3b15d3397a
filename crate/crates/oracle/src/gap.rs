//! Distance between one exponential-map step and the linear reference step,
//! both expressed in the exponential-family coordinates of the reference.

use crate::blr::{blr_gaussian_step, blr_rayleigh_step};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapProblem {
    /// Scalar Rayleigh scale family with rate `lambda = 1/g^2` and
    /// `m = E[theta loss']` held fixed.
    Rayleigh { lambda: f64, m: f64, tau: f64 },
    /// Standard-Gaussian base under `(A, b)` with loss
    /// `curvature/2 (theta - center)^2` at unit temperature.
    GaussianQuadratic { curvature: f64, center: f64, scale: f64, shift: f64 },
}

/// Rate after `g <- g exp(-alpha (m - tau))`.
pub fn lie_rayleigh_rate(lambda: f64, alpha: f64, m: f64, tau: f64) -> f64 {
    lambda * (2.0 * alpha * (m - tau)).exp()
}

/// `(S', b')` after one exact affine step with closed-form Gaussian
/// expectations, `S = 1/A^2`.
pub fn lie_gaussian_step(curvature: f64, center: f64, scale: f64, shift: f64, alpha: f64) -> (f64, f64) {
    let (c_x, c_y) = (2.0, 1.0);
    let mean_grad = curvature * (shift - center);
    let u = curvature * scale * scale - 1.0;
    let ratio = if u == 0.0 { -alpha } else { ((-alpha * u).exp() - 1.0) / u };
    let a = scale * (-alpha * u).exp();
    let b = shift + c_x / c_y * scale * scale * ratio * mean_grad;
    (1.0 / (a * a), b)
}

pub fn linearization_gap(problem: GapProblem, alpha: f64) -> f64 {
    match problem {
        GapProblem::Rayleigh { lambda, m, tau } => {
            (lie_rayleigh_rate(lambda, alpha, m, tau) - blr_rayleigh_step(lambda, 4.0 * alpha, m, tau)).abs()
        }
        GapProblem::GaussianQuadratic { curvature, center, scale, shift } => {
            let (s, b) = lie_gaussian_step(curvature, center, scale, shift, alpha);
            let precision = 1.0 / (scale * scale);
            let (s_ref, b_ref) =
                blr_gaussian_step(&[precision], &[shift], alpha, &[curvature], &[curvature * (shift - center)]);
            (s - s_ref[0]).hypot(b - b_ref[0])
        }
    }
}

/// `gap(alpha_i) / gap(alpha_{i+1})` for consecutive step sizes.
pub fn halving_ratios(problem: GapProblem, alphas: &[f64]) -> Vec<f64> {
    alphas
        .windows(2)
        .map(|w| linearization_gap(problem, w[0]) / linearization_gap(problem, w[1]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const RAYLEIGH: GapProblem = GapProblem::Rayleigh { lambda: 1.0, m: 3.0, tau: 1.0 };
    const GAUSS: GapProblem = GapProblem::GaussianQuadratic { curvature: 3.0, center: 0.0, scale: 1.0, shift: 2.0 };

    #[test]
    fn zero_step_has_no_gap() {
        assert_eq!(linearization_gap(RAYLEIGH, 0.0), 0.0);
        assert_eq!(linearization_gap(GAUSS, 0.0), 0.0);
    }

    #[test]
    fn rayleigh_scalar_instance() {
        assert!((linearization_gap(RAYLEIGH, 0.01) - 8.107_741_923_881_75e-4).abs() < 1e-15);
    }

    #[test]
    fn second_order_vanishing() {
        for p in [RAYLEIGH, GAUSS] {
            for a in [1e-2, 1e-3] {
                let r = linearization_gap(p, a) / linearization_gap(p, a / 2.0);
                assert!((3.5..=4.5).contains(&r), "{p:?} {a}: {r}");
            }
        }
    }
}
