//! Linear natural-gradient reference steps in exponential-family coordinates.

/// Rate update `lambda + (alpha' lambda / 2)(m - tau)` for the 1-D Rayleigh
/// family with `m = E[theta loss']`. The result may leave `lambda > 0`.
pub fn blr_rayleigh_step(lambda: f64, alpha_prime: f64, m: f64, tau: f64) -> f64 {
    lambda + 0.5 * alpha_prime * lambda * (m - tau)
}

/// Diagonal Gaussian update in precision/mean coordinates with `A^2 = 1/S`:
/// `S' = S(1 - 2 alpha) + 2 alpha E[hess]`, `b' = b - 2 alpha E[grad] / S`.
pub fn blr_gaussian_step(
    precision: &[f64],
    mean: &[f64],
    alpha: f64,
    expected_hessian: &[f64],
    expected_gradient: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let s = precision
        .iter()
        .zip(expected_hessian)
        .map(|(s, h)| s * (1.0 - 2.0 * alpha) + 2.0 * alpha * h)
        .collect();
    let b = mean
        .iter()
        .zip(precision)
        .zip(expected_gradient)
        .map(|((b, s), g)| b - 2.0 * alpha * g / s)
        .collect();
    (s, b)
}
