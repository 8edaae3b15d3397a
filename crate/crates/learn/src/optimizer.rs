use lieopt_core::{GroupElement, GroupKind, TangentVector};

use crate::error::{LearnError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant,
    /// Linear warmup from zero over `warmup_steps`, then cosine decay to zero.
    Cosine { warmup_steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub lr: f64,
    pub schedule: Schedule,
    /// Momentum for additive and multiplicative groups, and for the shift
    /// slot `M_V` of the affine group.
    pub beta: f64,
    /// Momentum for the affine scale slot `M_U`.
    pub beta2: f64,
    pub temperature: f64,
    pub samples: usize,
}

impl Hyper {
    pub fn defaults(kind: GroupKind) -> Self {
        let base = Hyper {
            lr: 0.1,
            schedule: Schedule::Constant,
            beta: 0.8,
            beta2: 0.8,
            temperature: 1.0,
            samples: 1,
        };
        match kind {
            GroupKind::Additive => base,
            GroupKind::DiagAffine => Hyper { lr: 1.0, beta: 0.8, beta2: 0.999, ..base },
            GroupKind::Multiplicative => Hyper { lr: 50.0, beta: 0.9, temperature: 0.005, ..base },
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        check_beta(self.beta2)?;
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(LearnError::InvalidConfig(format!("learning rate must be finite and >= 0, got {}", self.lr)));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LearnError::InvalidConfig(format!(
                "temperature must be finite and >= 0, got {}",
                self.temperature
            )));
        }
        if self.samples == 0 {
            return Err(LearnError::InvalidConfig("sample count K must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if (0.0..1.0).contains(&beta) {
        Ok(())
    } else {
        Err(LearnError::InvalidMomentum(beta))
    }
}

/// Learning rate at step `t` of `total`.
pub fn lr_schedule(hyper: &Hyper, t: usize, total: usize) -> Result<f64> {
    if t > total {
        return Err(LearnError::StepOutOfRange { step: t, total });
    }
    Ok(match hyper.schedule {
        Schedule::Constant => hyper.lr,
        Schedule::Cosine { warmup_steps } => {
            if t < warmup_steps {
                hyper.lr * t as f64 / warmup_steps as f64
            } else if total <= warmup_steps {
                hyper.lr
            } else {
                let progress = (t - warmup_steps) as f64 / (total - warmup_steps) as f64;
                hyper.lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
            }
        }
    })
}

fn blend(m: &mut [f64], y: &[f64], beta: f64) {
    for (m, y) in m.iter_mut().zip(y) {
        *m = (1.0 - beta) * y + beta * *m;
    }
}

/// `M <- (1 - beta) Y + beta M`. The affine scale slot uses `beta_scale`.
fn blend_into(m: &mut TangentVector, y: &TangentVector, beta: f64, beta_scale: f64) -> Result<()> {
    check_beta(beta)?;
    check_beta(beta_scale)?;
    if m.kind() != y.kind() {
        return Err(lieopt_core::Error::KindMismatch { expected: m.kind(), got: y.kind() }.into());
    }
    if m.dim() != y.dim() {
        return Err(lieopt_core::Error::DimensionMismatch { expected: m.dim(), got: y.dim() }.into());
    }
    match (m, y) {
        (TangentVector::Additive(m), TangentVector::Additive(y))
        | (TangentVector::Multiplicative(m), TangentVector::Multiplicative(y)) => blend(m, y, beta),
        (TangentVector::DiagAffine { x: mu, y: mv }, TangentVector::DiagAffine { x: u, y: v }) => {
            blend(mv, v, beta);
            blend(mu, u, beta_scale);
        }
        _ => unreachable!("kinds checked"),
    }
    Ok(())
}

pub fn apply_momentum(m: &TangentVector, y: &TangentVector, beta: f64) -> Result<TangentVector> {
    let mut out = m.clone();
    blend_into(&mut out, y, beta, beta)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub g: GroupElement,
    /// Momentum; for the affine group `x` holds `M_U` and `y` holds `M_V`.
    pub momentum: TangentVector,
    pub hyper: Hyper,
    pub step: usize,
    pub total_steps: usize,
}

impl OptimizerState {
    pub fn new(g: GroupElement, hyper: Hyper, total_steps: usize) -> Result<Self> {
        hyper.validate()?;
        g.validate()?;
        let momentum = TangentVector::zeros(g.kind(), g.dim());
        Ok(OptimizerState { g, momentum, hyper, step: 0, total_steps })
    }

    pub fn kind(&self) -> GroupKind {
        self.g.kind()
    }

    pub fn current_lr(&self) -> Result<f64> {
        lr_schedule(&self.hyper, self.step, self.total_steps)
    }

    fn expect(&self, kind: GroupKind) -> Result<()> {
        if self.kind() == kind {
            Ok(())
        } else {
            Err(lieopt_core::Error::KindMismatch { expected: kind, got: self.kind() }.into())
        }
    }

    /// Blends `direction` into the momentum and moves `g <- g exp(-alpha M)`.
    pub fn step_with(&mut self, direction: &TangentVector) -> Result<f64> {
        let alpha = self.current_lr()?;
        let mut m = self.momentum.clone();
        blend_into(&mut m, direction, self.hyper.beta, self.hyper.beta2)?;
        let next = self.g.step(&m, alpha)?;
        self.momentum = m;
        self.g = next;
        self.step += 1;
        Ok(alpha)
    }

    pub fn step_additive(&mut self, u: &TangentVector) -> Result<f64> {
        self.expect(GroupKind::Additive)?;
        self.step_with(u)
    }

    pub fn step_multiplicative(&mut self, u: &TangentVector) -> Result<f64> {
        self.expect(GroupKind::Multiplicative)?;
        self.step_with(u)
    }

    /// `b <- b + A (exp(-alpha M_U) - 1) / M_U * M_V`, then `A <- A exp(-alpha M_U)`;
    /// both use the pre-step `A`.
    pub fn step_affine(&mut self, u: &[f64], v: &[f64]) -> Result<f64> {
        self.expect(GroupKind::DiagAffine)?;
        self.step_with(&TangentVector::DiagAffine { x: u.to_vec(), y: v.to_vec() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn hyper(lr: f64, beta: f64) -> Hyper {
        Hyper { lr, beta, beta2: beta, ..Hyper::defaults(GroupKind::Additive) }
    }

    fn add(v: Vec<f64>) -> TangentVector {
        TangentVector::Additive(v)
    }

    #[test]
    fn momentum_examples() {
        assert_eq!(apply_momentum(&add(vec![7.0]), &add(vec![4.0]), 0.0).unwrap(), add(vec![4.0]));
        assert_eq!(apply_momentum(&add(vec![0.0]), &add(vec![4.0]), 0.25).unwrap(), add(vec![3.0]));
        assert_eq!(apply_momentum(&add(vec![2.0]), &add(vec![4.0]), 0.5).unwrap(), add(vec![3.0]));
        assert!(matches!(
            apply_momentum(&add(vec![2.0]), &add(vec![4.0]), 1.0),
            Err(LearnError::InvalidMomentum(_))
        ));
        assert!(apply_momentum(&add(vec![2.0]), &add(vec![4.0]), -0.1).is_err());
        assert!(apply_momentum(&add(vec![2.0]), &TangentVector::Multiplicative(vec![1.0]), 0.5).is_err());
    }

    #[test]
    fn additive_steps() {
        let mut s = OptimizerState::new(GroupElement::additive(vec![0.0]).unwrap(), hyper(0.1, 0.0), 10).unwrap();
        s.step_additive(&add(vec![1.0])).unwrap();
        assert_eq!(s.g, GroupElement::additive(vec![-0.1]).unwrap());
        s.step_additive(&add(vec![0.0])).unwrap();
        assert_eq!(s.g, GroupElement::additive(vec![-0.1]).unwrap());
    }

    #[test]
    fn dirac_quadratic_is_geometric() {
        let mut s = OptimizerState::new(GroupElement::additive(vec![1.0]).unwrap(), hyper(0.1, 0.0), 10).unwrap();
        let mut plain = 1.0f64;
        for _ in 0..10 {
            let g = match &s.g {
                GroupElement::Additive(v) => v.clone(),
                _ => unreachable!(),
            };
            s.step_additive(&add(g)).unwrap();
            plain -= 0.1 * plain;
        }
        let GroupElement::Additive(g) = &s.g else { unreachable!() };
        assert_eq!(g[0], plain);
        assert_abs_diff_eq!(g[0], 0.9f64.powi(10), epsilon = 1e-14);
    }

    #[test]
    fn multiplicative_steps() {
        let h = Hyper { lr: 0.5, beta: 0.0, ..Hyper::defaults(GroupKind::Multiplicative) };
        let mut s = OptimizerState::new(GroupElement::multiplicative(vec![2.0]).unwrap(), h, 1).unwrap();
        s.step_multiplicative(&TangentVector::Multiplicative(vec![1.0])).unwrap();
        let GroupElement::Multiplicative(g) = &s.g else { unreachable!() };
        assert_abs_diff_eq!(g[0], 1.213_061_319_425_267, epsilon = 1e-14);

        let h = Hyper { lr: 10.0, ..h };
        let mut s = OptimizerState::new(GroupElement::multiplicative(vec![1e-3]).unwrap(), h, 1).unwrap();
        s.step_multiplicative(&TangentVector::Multiplicative(vec![-100.0])).unwrap();
        let GroupElement::Multiplicative(g) = &s.g else { unreachable!() };
        assert!(g[0].is_finite() && g[0] > 0.0);
        assert_abs_diff_eq!(g[0] / 700f64.exp(), 1e-3, epsilon = 1e-15);
    }

    fn affine_after(u: f64, v: f64, alpha: f64, a: f64, b: f64) -> (f64, f64) {
        let h = Hyper { lr: alpha, beta: 0.0, beta2: 0.0, ..Hyper::defaults(GroupKind::DiagAffine) };
        let mut s = OptimizerState::new(GroupElement::diag_affine(vec![a], vec![b]).unwrap(), h, 1).unwrap();
        s.step_affine(&[u], &[v]).unwrap();
        let GroupElement::DiagAffine { scale, shift } = &s.g else { unreachable!() };
        (scale[0], shift[0])
    }

    #[test]
    fn affine_steps() {
        let (a, b) = affine_after(0.0, 2.0, 0.1, 3.0, 1.0);
        assert_eq!(a, 3.0);
        assert_abs_diff_eq!(b, 1.0 - 0.1 * 3.0 * 2.0, epsilon = 1e-15);
        let (a, b) = affine_after(0.7, 0.0, 0.1, 3.0, 1.0);
        assert_eq!(b, 1.0);
        assert_abs_diff_eq!(a, 3.0 * (-0.07f64).exp(), epsilon = 1e-15);
        let (a, b) = affine_after(1.0, 1.0, 0.1, 1.0, 0.0);
        assert_abs_diff_eq!(b, -0.095_162_581_964_040_43, epsilon = 1e-15);
        assert_abs_diff_eq!(a, 0.904_837_418_035_959_6, epsilon = 1e-15);
    }

    #[test]
    fn affine_momentum_pairing() {
        let h = Hyper { lr: 0.0, beta: 0.5, beta2: 0.9, ..Hyper::defaults(GroupKind::DiagAffine) };
        let mut s = OptimizerState::new(GroupElement::identity(GroupKind::DiagAffine, 1).unwrap(), h, 1).unwrap();
        s.step_affine(&[1.0], &[1.0]).unwrap();
        let TangentVector::DiagAffine { x, y } = &s.momentum else { unreachable!() };
        assert_abs_diff_eq!(x[0], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(y[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let mut s = OptimizerState::new(GroupElement::additive(vec![0.0]).unwrap(), hyper(0.1, 0.0), 1).unwrap();
        assert!(s.step_multiplicative(&TangentVector::Multiplicative(vec![1.0])).is_err());
        assert!(s.step_affine(&[1.0], &[1.0]).is_err());
        assert_eq!(s.step, 0);
    }

    #[test]
    fn schedules() {
        let h = Hyper { lr: 2.0, schedule: Schedule::Cosine { warmup_steps: 10 }, ..hyper(2.0, 0.0) };
        assert_eq!(lr_schedule(&h, 0, 110).unwrap(), 0.0);
        assert_abs_diff_eq!(lr_schedule(&h, 5, 110).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(lr_schedule(&h, 10, 110).unwrap(), 2.0);
        assert_abs_diff_eq!(lr_schedule(&h, 60, 110).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lr_schedule(&h, 110, 110).unwrap(), 0.0, epsilon = 1e-15);
        assert!(matches!(lr_schedule(&h, 111, 110), Err(LearnError::StepOutOfRange { .. })));
        let c = hyper(0.3, 0.0);
        assert_eq!(lr_schedule(&c, 7, 9).unwrap(), 0.3);
    }

    #[test]
    fn zero_beta_matches_memoryless_bitwise() {
        let mut s = OptimizerState::new(GroupElement::multiplicative(vec![1.0, 2.0]).unwrap(), hyper(0.3, 0.0), 50).unwrap();
        let mut g = vec![1.0, 2.0];
        for t in 0..50 {
            let u = vec![(t as f64).sin(), -(t as f64 * 0.3).cos()];
            s.step_multiplicative(&TangentVector::Multiplicative(u.clone())).unwrap();
            let step = TangentVector::Multiplicative(u).scaled(-0.3).exp();
            g = GroupElement::multiplicative(g).unwrap().compose(&step).map(|e| match e {
                GroupElement::Multiplicative(v) => v,
                _ => unreachable!(),
            }).unwrap();
        }
        assert_eq!(s.g, GroupElement::multiplicative(g).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn manifold_closure(seed in any::<u64>(), affine in any::<bool>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let p = 3;
            let (g, kind) = if affine {
                (GroupElement::identity(GroupKind::DiagAffine, p).unwrap(), GroupKind::DiagAffine)
            } else {
                (GroupElement::identity(GroupKind::Multiplicative, p).unwrap(), GroupKind::Multiplicative)
            };
            let h = Hyper { beta: 0.5, beta2: 0.9, ..Hyper::defaults(kind) };
            let mut s = OptimizerState::new(g, h, 10_000).unwrap();
            for _ in 0..10_000 {
                s.hyper.lr = 10f64.powf(rng.random_range(-4.0..3.0));
                let mut v = || (0..p).map(|_| rng.random_range(-50.0..50.0)).collect::<Vec<f64>>();
                let y = match kind {
                    GroupKind::DiagAffine => TangentVector::DiagAffine { x: v(), y: v() },
                    _ => TangentVector::Multiplicative(v()),
                };
                s.step_with(&y).unwrap();
                let min = s.g.min_scale().unwrap();
                prop_assert!(min > 0.0 && min.is_finite());
            }
        }
    }
}
