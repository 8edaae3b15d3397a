//! Monte-Carlo estimates of the update directions for each group.
//!
//! Noise for sample `k` comes from stream `k` of the configured seed, so a
//! sample's draw does not depend on how many others run beside it. Samples
//! are evaluated through [`Execution::map`] and summed in index order.

use lieopt_core::{noise_rng, BaseDistribution, Execution, GroupElement, GroupKind, TangentVector};

use crate::error::{LearnError, Result};

/// Gradient oracle for the minibatch objective `(1/n) sum_j loss_j + R / N`.
pub trait GradientProvider: Sync {
    /// Parameter dimension `P`.
    fn dim(&self) -> usize;

    /// Dataset size `N`.
    fn dataset_size(&self) -> usize;

    /// Writes the minibatch gradient at `theta` into `grad` and returns the
    /// minibatch objective.
    fn loss_and_grad(&self, theta: &[f64], batch: &[usize], grad: &mut [f64]) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCConfig {
    pub samples: usize,
    pub seed: u64,
    pub temperature: f64,
    pub exec: Execution,
}

impl MCConfig {
    pub fn new(samples: usize, seed: u64, temperature: f64) -> Self {
        MCConfig { samples, seed, temperature, exec: Execution::default() }
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(LearnError::InvalidConfig("sample count K must be at least 1".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LearnError::InvalidConfig(format!(
                "temperature must be finite and non-negative, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// A direction estimate together with the mean minibatch objective over the
/// evaluated samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub direction: TangentVector,
    pub loss: f64,
}

/// Seed for optimizer step `step` of a run seeded with `run_seed`.
pub fn step_seed(run_seed: u64, step: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = run_seed ^ step.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_support(dist: &BaseDistribution, kind: GroupKind) -> Result<()> {
    dist.validate()?;
    lieopt_core::differential::check_compatible(dist, kind)?;
    Ok(())
}

fn check_provider(grad: &dyn GradientProvider, g: &GroupElement) -> Result<()> {
    if grad.dim() != g.dim() {
        return Err(lieopt_core::Error::DimensionMismatch { expected: grad.dim(), got: g.dim() }.into());
    }
    if grad.dataset_size() == 0 {
        return Err(LearnError::Empty("dataset"));
    }
    Ok(())
}

/// Per-sample statistics `(first, second, loss)`; `second` is empty unless the
/// group needs two accumulators.
type SampleStats = (Vec<f64>, Vec<f64>, f64);

/// Adds one sample into the accumulators.
type Stats<'a> = dyn Fn(&[f64], &[f64], &[f64], &mut [f64], &mut [f64]) + Sync + 'a;

/// Draws `eps_k`, evaluates the gradient at `theta_k = g . eps_k` and lets
/// `stats` accumulate `(eps, theta, grad)`. Sums run in sample order whether
/// or not the samples are spread over threads.
fn run_samples(
    grad: &dyn GradientProvider,
    dist: &BaseDistribution,
    g: &GroupElement,
    cfg: &MCConfig,
    batch: &[usize],
    second: bool,
    stats: &Stats<'_>,
) -> Result<(Vec<f64>, Vec<f64>, f64, usize)> {
    cfg.validate()?;
    let p = g.dim();
    let q = if second { p } else { 0 };
    // A point mass gives the same evaluation for every k.
    let k = if matches!(dist, BaseDistribution::DiracDelta) { 1 } else { cfg.samples };
    let kind = g.kind();
    let sample = |i: usize, eps: &mut [f64], theta: &mut [f64], gr: &mut [f64]| -> Result<f64> {
        let mut rng = noise_rng(cfg.seed, i as u64);
        dist.fill(kind, &mut rng, eps);
        g.act_into(eps, theta)?;
        grad.loss_and_grad(theta, batch, gr)
    };
    let mut first = vec![0.0; p];
    let mut other = vec![0.0; q];
    let mut loss = 0.0;
    if cfg.exec.workers() <= 1 || k == 1 {
        let (mut eps, mut theta, mut gr) = (vec![0.0; p], vec![0.0; p], vec![0.0; p]);
        for i in 0..k {
            loss += sample(i, &mut eps, &mut theta, &mut gr)?;
            stats(&eps, &theta, &gr, &mut first, &mut other);
        }
    } else {
        let results: Vec<Result<SampleStats>> = cfg.exec.map(k, |i| {
            let (mut eps, mut theta, mut gr) = (vec![0.0; p], vec![0.0; p], vec![0.0; p]);
            let l = sample(i, &mut eps, &mut theta, &mut gr)?;
            let mut a = vec![0.0; p];
            let mut b = vec![0.0; q];
            stats(&eps, &theta, &gr, &mut a, &mut b);
            Ok((a, b, l))
        });
        for r in results {
            let (a, b, l) = r?;
            first.iter_mut().zip(&a).for_each(|(s, v)| *s += v);
            other.iter_mut().zip(&b).for_each(|(s, v)| *s += v);
            loss += l;
        }
    }
    Ok((first, other, loss / k as f64, k))
}

/// `U = (1/K) sum_k grad(g + eps_k)`.
pub fn additive_direction(
    grad: &dyn GradientProvider,
    dist: &BaseDistribution,
    g: &GroupElement,
    cfg: &MCConfig,
    batch: &[usize],
) -> Result<Estimate> {
    expect_kind(g, GroupKind::Additive)?;
    check_support(dist, GroupKind::Additive)?;
    check_provider(grad, g)?;
    let (mut u, _, loss, k) = run_samples(grad, dist, g, cfg, batch, false, &|_, _, gr, u, _| {
        u.iter_mut().zip(gr).for_each(|(s, d)| *s += d)
    })?;
    if k > 1 {
        let kf = k as f64;
        u.iter_mut().for_each(|v| *v /= kf);
    }
    Ok(Estimate { direction: TangentVector::Additive(u), loss })
}

/// `U = (1/K) sum_k [theta_k * grad(theta_k) - tau/N]` with `theta_k = g * eps_k`.
pub fn multiplicative_direction(
    grad: &dyn GradientProvider,
    dist: &BaseDistribution,
    g: &GroupElement,
    cfg: &MCConfig,
    batch: &[usize],
) -> Result<Estimate> {
    expect_kind(g, GroupKind::Multiplicative)?;
    check_support(dist, GroupKind::Multiplicative)?;
    g.validate()?;
    check_provider(grad, g)?;
    let shift = cfg.temperature / grad.dataset_size() as f64;
    let (mut u, _, loss, k) = run_samples(grad, dist, g, cfg, batch, false, &|_, theta, gr, u, _| {
        for ((s, t), d) in u.iter_mut().zip(theta).zip(gr) {
            *s += t * d;
        }
    })?;
    let kf = k as f64;
    u.iter_mut().for_each(|v| *v = *v / kf - shift);
    Ok(Estimate { direction: TangentVector::Multiplicative(u), loss })
}

/// Fisher normalizers applied inside [`affine_directions`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineConstants {
    pub c_x: f64,
    pub c_y: f64,
}

impl AffineConstants {
    /// Constants for `dist`, or `fallback` when the base has no finite Fisher
    /// information.
    pub fn for_base(dist: &BaseDistribution, fallback: AffineConstants) -> Result<Self> {
        Ok(match dist.fisher_constants_affine()?.value() {
            Some(f) => AffineConstants { c_x: f.c_x, c_y: f.c_y },
            None => fallback,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.c_x > 0.0 && self.c_y > 0.0 && self.c_x.is_finite() && self.c_y.is_finite() {
            Ok(())
        } else {
            Err(LearnError::InvalidConfig(format!(
                "affine constants must be positive and finite, got c_X={} c_y={}",
                self.c_x, self.c_y
            )))
        }
    }
}

/// Scale part `U = (1/(c_X K)) sum_k [A eps_k * grad(theta_k) - tau/N]` and
/// shift part `V = (1/(c_y K)) sum_k A * grad(theta_k)`, packed as the `x`
/// and `y` halves of an affine tangent vector.
pub fn affine_directions(
    grad: &dyn GradientProvider,
    dist: &BaseDistribution,
    g: &GroupElement,
    cfg: &MCConfig,
    batch: &[usize],
    constants: AffineConstants,
) -> Result<Estimate> {
    expect_kind(g, GroupKind::DiagAffine)?;
    check_support(dist, GroupKind::DiagAffine)?;
    constants.validate()?;
    g.validate()?;
    check_provider(grad, g)?;
    let scale = match g {
        GroupElement::DiagAffine { scale, .. } => scale,
        _ => unreachable!("kind checked"),
    };
    let shift = cfg.temperature / grad.dataset_size() as f64;
    let (mut u, mut v, loss, k) = run_samples(grad, dist, g, cfg, batch, true, &|eps, _, gr, u, v| {
        for ((((su, sv), a), e), d) in u.iter_mut().zip(v.iter_mut()).zip(scale).zip(eps).zip(gr) {
            *su += a * e * d;
            *sv += a * d;
        }
    })?;
    let kf = k as f64;
    u.iter_mut().for_each(|x| *x = (*x / kf - shift) / constants.c_x);
    v.iter_mut().for_each(|y| *y = *y / kf / constants.c_y);
    Ok(Estimate { direction: TangentVector::DiagAffine { x: u, y: v }, loss })
}

/// Dispatches on the kind of `g`.
pub fn direction(
    grad: &dyn GradientProvider,
    dist: &BaseDistribution,
    g: &GroupElement,
    cfg: &MCConfig,
    batch: &[usize],
    constants: AffineConstants,
) -> Result<Estimate> {
    match g.kind() {
        GroupKind::Additive => additive_direction(grad, dist, g, cfg, batch),
        GroupKind::Multiplicative => multiplicative_direction(grad, dist, g, cfg, batch),
        GroupKind::DiagAffine => affine_directions(grad, dist, g, cfg, batch, constants),
    }
}

fn expect_kind(g: &GroupElement, kind: GroupKind) -> Result<()> {
    if g.kind() == kind {
        Ok(())
    } else {
        Err(lieopt_core::Error::KindMismatch { expected: kind, got: g.kind() }.into())
    }
}

/// Closed-form separable loss `sum_i f(theta_i)` for tests and benches.
#[derive(Debug, Clone, Copy)]
pub struct Separable {
    pub dim: usize,
    pub n: usize,
    /// Returns `(value, derivative)` at one coordinate.
    pub f: fn(f64) -> (f64, f64),
}

impl Separable {
    /// `0.5 * |theta|^2`.
    pub fn half_square(dim: usize) -> Self {
        Separable { dim, n: 1, f: |t| (0.5 * t * t, t) }
    }
}

impl GradientProvider for Separable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn dataset_size(&self) -> usize {
        self.n
    }

    fn loss_and_grad(&self, theta: &[f64], _batch: &[usize], grad: &mut [f64]) -> Result<f64> {
        let mut total = 0.0;
        for (t, d) in theta.iter().zip(grad.iter_mut()) {
            let (v, dv) = (self.f)(*t);
            total += v;
            *d = dv;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn vecs(t: &TangentVector) -> (Vec<f64>, Vec<f64>) {
        match t {
            TangentVector::Additive(v) | TangentVector::Multiplicative(v) => (v.clone(), vec![]),
            TangentVector::DiagAffine { x, y } => (x.clone(), y.clone()),
        }
    }

    #[test]
    fn dirac_additive_is_the_gradient() {
        let g = GroupElement::additive(vec![3.0, -1.0]).unwrap();
        let cfg = MCConfig::new(16, 5, 0.0);
        let e = additive_direction(&Separable::half_square(2), &BaseDistribution::DiracDelta, &g, &cfg, &[]).unwrap();
        assert_eq!(vecs(&e.direction).0, vec![3.0, -1.0]);
    }

    #[test]
    fn gaussian_additive_mean() {
        let g = GroupElement::additive(vec![2.0]).unwrap();
        let cfg = MCConfig::new(1_000_000, 1, 0.0);
        let e = additive_direction(
            &Separable::half_square(1),
            &BaseDistribution::Gaussian { sigma: 1.0 },
            &g,
            &cfg,
            &[],
        )
        .unwrap();
        assert_abs_diff_eq!(vecs(&e.direction).0[0], 2.0, epsilon = 0.01);
    }

    #[test]
    fn single_sample_is_noise_injection() {
        let g = GroupElement::additive(vec![0.5, 1.5]).unwrap();
        let cfg = MCConfig::new(1, 42, 0.0);
        let dist = BaseDistribution::Gaussian { sigma: 1.0 };
        let e = additive_direction(&Separable::half_square(2), &dist, &g, &cfg, &[]).unwrap();
        let xi = &dist.sample(2, 1, 42)[0];
        assert_eq!(vecs(&e.direction).0, vec![0.5 + xi[0], 1.5 + xi[1]]);
    }

    #[test]
    fn rayleigh_multiplicative_second_moment() {
        let g = GroupElement::multiplicative(vec![2.0]).unwrap();
        let cfg = MCConfig::new(1_000_000, 3, 0.0);
        let e = multiplicative_direction(&Separable::half_square(1), &BaseDistribution::Rayleigh, &g, &cfg, &[])
            .unwrap();
        assert_abs_diff_eq!(vecs(&e.direction).0[0], 8.0, epsilon = 0.03);
    }

    #[test]
    fn exponential_linear_loss() {
        let c = 1.7;
        let grad = Separable { dim: 1, n: 1, f: |t| (1.7 * t, 1.7) };
        let g = GroupElement::multiplicative(vec![0.6]).unwrap();
        let cfg = MCConfig::new(400_000, 9, 0.0);
        let e = multiplicative_direction(&grad, &BaseDistribution::Exponential, &g, &cfg, &[]).unwrap();
        assert_abs_diff_eq!(vecs(&e.direction).0[0], c * 0.6, epsilon = 0.01);
    }

    #[test]
    fn temperature_shift_and_fixed_point() {
        // Dirac base at g: U = g * g' - tau / N. With g' = 1 the fixed point is
        // g = tau / N.
        let grad = Separable { dim: 1, n: 4, f: |t| (t, 1.0) };
        let g = GroupElement::multiplicative(vec![0.5]).unwrap();
        let cfg = MCConfig::new(3, 0, 2.0);
        let e = multiplicative_direction(&grad, &BaseDistribution::DiracDelta, &g, &cfg, &[]).unwrap();
        assert_eq!(vecs(&e.direction).0[0], 0.0);
    }

    #[test]
    fn affine_dirac() {
        let grad = Separable { dim: 2, n: 10, f: |t| (0.5 * t * t, t) };
        let g = GroupElement::diag_affine(vec![2.0, 0.5], vec![1.0, -4.0]).unwrap();
        let cfg = MCConfig::new(8, 0, 3.0);
        let c = AffineConstants { c_x: 2.0, c_y: 0.5 };
        let e = affine_directions(&grad, &BaseDistribution::DiracDelta, &g, &cfg, &[], c).unwrap();
        let (u, v) = vecs(&e.direction);
        assert_eq!(u, vec![-0.3 / 2.0; 2]);
        assert_eq!(v, vec![2.0 * 1.0 / 0.5, 0.5 * -4.0 / 0.5]);
    }

    #[test]
    fn affine_gaussian_moments() {
        let c = AffineConstants { c_x: 2.0, c_y: 1.0 };
        let dist = BaseDistribution::Gaussian { sigma: 1.0 };
        let grad = Separable::half_square(1);
        let cfg = MCConfig::new(1_000_000, 21, 0.0);
        let g = GroupElement::diag_affine(vec![1.0], vec![0.0]).unwrap();
        let (u, v) = vecs(&affine_directions(&grad, &dist, &g, &cfg, &[], c).unwrap().direction);
        assert_abs_diff_eq!(u[0] * c.c_x, 1.0, epsilon = 0.01);
        assert_abs_diff_eq!(v[0] * c.c_y, 0.0, epsilon = 0.01);
        // theta ~ N(3, 4): E[(theta - 3) theta] = 4, 2 E[theta] = 6.
        let g = GroupElement::diag_affine(vec![2.0], vec![3.0]).unwrap();
        let (u, v) = vecs(&affine_directions(&grad, &dist, &g, &cfg, &[], c).unwrap().direction);
        assert_abs_diff_eq!(u[0] * c.c_x, 4.0, epsilon = 0.05);
        assert_abs_diff_eq!(v[0] * c.c_y, 6.0, epsilon = 0.05);
    }

    #[test]
    fn rejects_mismatched_support_and_bad_config() {
        let h = Separable::half_square(1);
        let ga = GroupElement::additive(vec![1.0]).unwrap();
        let gm = GroupElement::multiplicative(vec![1.0]).unwrap();
        let cfg = MCConfig::new(4, 0, 0.0);
        assert!(additive_direction(&h, &BaseDistribution::Rayleigh, &ga, &cfg, &[]).is_err());
        assert!(multiplicative_direction(&h, &BaseDistribution::Gaussian { sigma: 1.0 }, &gm, &cfg, &[]).is_err());
        assert!(additive_direction(&h, &BaseDistribution::DiracDelta, &gm, &cfg, &[]).is_err());
        let zero = MCConfig::new(0, 0, 0.0);
        assert!(additive_direction(&h, &BaseDistribution::DiracDelta, &ga, &zero, &[]).is_err());
    }

    #[test]
    fn standard_error_shrinks_at_root_k() {
        // |U_K - 1| for the scale part under N(0,1) and loss theta^2/2, averaged
        // over independent seeds to estimate the standard error at each K.
        let dist = BaseDistribution::Gaussian { sigma: 1.0 };
        let grad = Separable::half_square(1);
        let g = GroupElement::diag_affine(vec![1.0], vec![0.0]).unwrap();
        let c = AffineConstants { c_x: 1.0, c_y: 1.0 };
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for j in 1..=8u32 {
            let k = 4usize.pow(j);
            let reps = 64;
            let mse: f64 = (0..reps)
                .map(|r| {
                    let cfg = MCConfig::new(k, 1000 * j as u64 + r, 0.0);
                    let (u, _) = vecs(&affine_directions(&grad, &dist, &g, &cfg, &[], c).unwrap().direction);
                    (u[0] - 1.0).powi(2)
                })
                .sum::<f64>()
                / reps as f64;
            xs.push((k as f64).ln());
            ys.push(mse.sqrt().ln());
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope + 0.5).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn deterministic_across_execution_modes() {
        let dist = BaseDistribution::Laplace { scale: 0.3 };
        let grad = Separable { dim: 5, n: 7, f: |t| (t.sin(), t.cos()) };
        let g = GroupElement::diag_affine(vec![0.4; 5], vec![0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        let c = AffineConstants { c_x: 1.0, c_y: 1.0 / 0.09 };
        let base = MCConfig::new(33, 77, 0.5);
        let seq = affine_directions(&grad, &dist, &g, &base.with_exec(Execution::Sequential), &[], c).unwrap();
        let par = affine_directions(&grad, &dist, &g, &base.with_exec(Execution::Parallel), &[], c).unwrap();
        assert_eq!(seq, par);
        // Force the fan-out path even on a single-core machine.
        #[cfg(feature = "parallel")]
        {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
            for kind in [GroupKind::Additive, GroupKind::Multiplicative] {
                let (dist, g) = match kind {
                    GroupKind::Additive => (dist, GroupElement::additive(vec![0.2; 5]).unwrap()),
                    _ => (BaseDistribution::Rayleigh, GroupElement::multiplicative(vec![0.2; 5]).unwrap()),
                };
                let seq = direction(&grad, &dist, &g, &base.with_exec(Execution::Sequential), &[], c).unwrap();
                let par = pool.install(|| direction(&grad, &dist, &g, &base.with_exec(Execution::Parallel), &[], c)).unwrap();
                assert_eq!(seq, par);
            }
            let par = pool.install(|| affine_directions(&grad, &dist, &g, &base.with_exec(Execution::Parallel), &[], c)).unwrap();
            assert_eq!(seq, par);
        }
    }

    #[test]
    fn step_seeds_differ() {
        let a: Vec<u64> = (0..100).map(|s| step_seed(1, s)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), 100);
        assert_ne!(step_seed(1, 0), step_seed(2, 0));
    }
}
