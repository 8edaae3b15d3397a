//! The three parameter groups: translations `(R^P, +)`, positive scalings
//! `(R_{>0}^P, *)` and the diagonal affine group of pairs `(A, b)`.
//!
//! All groups act componentwise on parameter vectors, so every element is
//! stored as plain vectors; the affine scale `A` is the diagonal of a
//! positive diagonal matrix.

use crate::error::{Error, Result};

/// Largest magnitude allowed in an exponent before calling `exp`.
///
/// `exp(700)` is finite and `exp(-700)` is a normal positive number, so
/// clamping keeps scales finite and strictly positive for any step.
pub const MAX_EXPONENT: f64 = 700.0;

/// Below this magnitude `exprel` switches to its Taylor polynomial.
pub const EXPREL_TAYLOR_CUTOFF: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKind {
    Additive,
    Multiplicative,
    DiagAffine,
}

impl GroupKind {
    /// Point fixed by the action of every group element, i.e. where a point
    /// mass base distribution sits.
    pub fn noise_fixed_point(self) -> f64 {
        match self {
            GroupKind::Multiplicative => 1.0,
            GroupKind::Additive | GroupKind::DiagAffine => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GroupKind::Additive => "additive",
            GroupKind::Multiplicative => "multiplicative",
            GroupKind::DiagAffine => "affine",
        }
    }
}

impl std::str::FromStr for GroupKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "additive" | "add" => Ok(GroupKind::Additive),
            "multiplicative" | "mult" => Ok(GroupKind::Multiplicative),
            "affine" | "diag_affine" | "diagaffine" => Ok(GroupKind::DiagAffine),
            other => Err(Error::InvalidParameter(format!("unknown group kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for GroupKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A point on one of the three groups.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupElement {
    Additive(Vec<f64>),
    /// Strictly positive entries.
    Multiplicative(Vec<f64>),
    /// `scale` strictly positive; acts as `theta -> scale * theta + shift`.
    DiagAffine { scale: Vec<f64>, shift: Vec<f64> },
}

/// An element of the Lie algebra (tangent space at the identity).
///
/// For the affine group `x` is the diagonal of the matrix part and `y` the
/// translation part.
#[derive(Debug, Clone, PartialEq)]
pub enum TangentVector {
    Additive(Vec<f64>),
    Multiplicative(Vec<f64>),
    DiagAffine { x: Vec<f64>, y: Vec<f64> },
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

fn check_positive(v: &[f64]) -> Result<()> {
    match v.iter().position(|&x| !(x > 0.0)) {
        None => Ok(()),
        Some(index) => Err(Error::NonPositive { index, value: v[index] }),
    }
}

fn check_nonempty(p: usize) -> Result<()> {
    if p == 0 {
        Err(Error::EmptyDimension)
    } else {
        Ok(())
    }
}

/// `exp` with the exponent clamped to `[-MAX_EXPONENT, MAX_EXPONENT]`.
#[inline]
pub fn bounded_exp(x: f64) -> f64 {
    x.clamp(-MAX_EXPONENT, MAX_EXPONENT).exp()
}

/// Keeps a product of scales inside the positive normal range.
#[inline]
fn keep_positive(x: f64) -> f64 {
    x.clamp(f64::MIN_POSITIVE, f64::MAX)
}

/// `(e^x - 1) / x`, continuous at zero.
pub fn exprel(x: f64) -> f64 {
    if x.abs() < EXPREL_TAYLOR_CUTOFF {
        // 1 + x/2 + x^2/6 + x^3/24 + x^4/120
        1.0 + x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0)))
    } else {
        x.exp_m1() / x
    }
}

/// Shift part of `exp((x, y))` for one coordinate: `(e^x - 1)/x * y`, using
/// the same exponent clamp as the scale part.
#[inline]
fn affine_exp_shift(x: f64, y: f64) -> f64 {
    if x.abs() <= MAX_EXPONENT {
        exprel(x) * y
    } else {
        (bounded_exp(x) - 1.0) / x * y
    }
}

impl GroupElement {
    pub fn additive(g: Vec<f64>) -> Result<Self> {
        check_nonempty(g.len())?;
        Ok(GroupElement::Additive(g))
    }

    pub fn multiplicative(g: Vec<f64>) -> Result<Self> {
        check_nonempty(g.len())?;
        check_positive(&g)?;
        Ok(GroupElement::Multiplicative(g))
    }

    pub fn diag_affine(scale: Vec<f64>, shift: Vec<f64>) -> Result<Self> {
        check_nonempty(scale.len())?;
        check_dim(scale.len(), shift.len())?;
        check_positive(&scale)?;
        Ok(GroupElement::DiagAffine { scale, shift })
    }

    pub fn identity(kind: GroupKind, p: usize) -> Result<Self> {
        check_nonempty(p)?;
        Ok(match kind {
            GroupKind::Additive => GroupElement::Additive(vec![0.0; p]),
            GroupKind::Multiplicative => GroupElement::Multiplicative(vec![1.0; p]),
            GroupKind::DiagAffine => GroupElement::DiagAffine {
                scale: vec![1.0; p],
                shift: vec![0.0; p],
            },
        })
    }

    pub fn kind(&self) -> GroupKind {
        match self {
            GroupElement::Additive(_) => GroupKind::Additive,
            GroupElement::Multiplicative(_) => GroupKind::Multiplicative,
            GroupElement::DiagAffine { .. } => GroupKind::DiagAffine,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            GroupElement::Additive(g) | GroupElement::Multiplicative(g) => g.len(),
            GroupElement::DiagAffine { scale, .. } => scale.len(),
        }
    }

    /// Checks the positivity invariant; useful after deserialization.
    pub fn validate(&self) -> Result<()> {
        check_nonempty(self.dim())?;
        match self {
            GroupElement::Additive(_) => Ok(()),
            GroupElement::Multiplicative(g) => check_positive(g),
            GroupElement::DiagAffine { scale, shift } => {
                check_dim(scale.len(), shift.len())?;
                check_positive(scale)
            }
        }
    }

    /// Smallest scale entry; `None` for the additive group.
    pub fn min_scale(&self) -> Option<f64> {
        match self {
            GroupElement::Additive(_) => None,
            GroupElement::Multiplicative(s) | GroupElement::DiagAffine { scale: s, .. } => {
                Some(s.iter().copied().fold(f64::INFINITY, f64::min))
            }
        }
    }

    fn ensure_same(&self, other_kind: GroupKind, other_dim: usize) -> Result<()> {
        if self.kind() != other_kind {
            return Err(Error::KindMismatch {
                expected: self.kind(),
                got: other_kind,
            });
        }
        check_dim(self.dim(), other_dim)
    }

    /// Group law `self * other`.
    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        self.ensure_same(other.kind(), other.dim())?;
        Ok(match (self, other) {
            (GroupElement::Additive(a), GroupElement::Additive(b)) => {
                GroupElement::Additive(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            (GroupElement::Multiplicative(a), GroupElement::Multiplicative(b)) => {
                GroupElement::Multiplicative(
                    a.iter().zip(b).map(|(x, y)| keep_positive(x * y)).collect(),
                )
            }
            (
                GroupElement::DiagAffine { scale: a1, shift: b1 },
                GroupElement::DiagAffine { scale: a2, shift: b2 },
            ) => GroupElement::DiagAffine {
                scale: a1.iter().zip(a2).map(|(x, y)| keep_positive(x * y)).collect(),
                shift: a1
                    .iter()
                    .zip(b2)
                    .zip(b1)
                    .map(|((a, b2), b1)| a * b2 + b1)
                    .collect(),
            },
            _ => unreachable!("kinds checked above"),
        })
    }

    pub fn inverse(&self) -> GroupElement {
        match self {
            GroupElement::Additive(g) => GroupElement::Additive(g.iter().map(|x| -x).collect()),
            GroupElement::Multiplicative(g) => {
                GroupElement::Multiplicative(g.iter().map(|x| keep_positive(1.0 / x)).collect())
            }
            GroupElement::DiagAffine { scale, shift } => GroupElement::DiagAffine {
                scale: scale.iter().map(|a| keep_positive(1.0 / a)).collect(),
                shift: scale.iter().zip(shift).map(|(a, b)| -b / a).collect(),
            },
        }
    }

    /// Action on a parameter vector, `g . theta`.
    pub fn act(&self, theta: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), theta.len())?;
        let mut out = vec![0.0; theta.len()];
        self.act_into(theta, &mut out)?;
        Ok(out)
    }

    /// Allocation-free form of [`GroupElement::act`].
    pub fn act_into(&self, theta: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), theta.len())?;
        check_dim(self.dim(), out.len())?;
        match self {
            GroupElement::Additive(g) => {
                for ((o, t), g) in out.iter_mut().zip(theta).zip(g) {
                    *o = t + g;
                }
            }
            GroupElement::Multiplicative(g) => {
                check_positive(theta)?;
                for ((o, t), g) in out.iter_mut().zip(theta).zip(g) {
                    *o = g * t;
                }
            }
            GroupElement::DiagAffine { scale, shift } => {
                for (((o, t), a), b) in out.iter_mut().zip(theta).zip(scale).zip(shift) {
                    *o = a * t + b;
                }
            }
        }
        Ok(())
    }

    /// `g exp(-alpha Y)`: one step along the left-translated exponential.
    pub fn step(&self, direction: &TangentVector, alpha: f64) -> Result<GroupElement> {
        self.ensure_same(direction.kind(), direction.dim())?;
        self.compose(&direction.scaled(-alpha).exp())
    }

    /// `(Ad_g V) . theta`.
    pub fn adjoint_act(&self, v: &TangentVector, theta: &[f64]) -> Result<Vec<f64>> {
        self.ensure_same(v.kind(), v.dim())?;
        check_dim(self.dim(), theta.len())?;
        Ok(match (self, v) {
            (GroupElement::Additive(_), TangentVector::Additive(x)) => x.clone(),
            (GroupElement::Multiplicative(_), TangentVector::Multiplicative(x)) => {
                x.iter().zip(theta).map(|(x, t)| x * t).collect()
            }
            (GroupElement::DiagAffine { scale, shift }, TangentVector::DiagAffine { x, y }) => x
                .iter()
                .zip(y)
                .zip(scale)
                .zip(shift)
                .zip(theta)
                .map(|((((x, y), a), b), t)| x * (t - b) + a * y)
                .collect(),
            _ => unreachable!("kinds checked above"),
        })
    }
}

impl TangentVector {
    pub fn zeros(kind: GroupKind, p: usize) -> TangentVector {
        match kind {
            GroupKind::Additive => TangentVector::Additive(vec![0.0; p]),
            GroupKind::Multiplicative => TangentVector::Multiplicative(vec![0.0; p]),
            GroupKind::DiagAffine => TangentVector::DiagAffine {
                x: vec![0.0; p],
                y: vec![0.0; p],
            },
        }
    }

    pub fn kind(&self) -> GroupKind {
        match self {
            TangentVector::Additive(_) => GroupKind::Additive,
            TangentVector::Multiplicative(_) => GroupKind::Multiplicative,
            TangentVector::DiagAffine { .. } => GroupKind::DiagAffine,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TangentVector::Additive(x) | TangentVector::Multiplicative(x) => x.len(),
            TangentVector::DiagAffine { x, .. } => x.len(),
        }
    }

    pub fn scaled(&self, factor: f64) -> TangentVector {
        let s = |v: &[f64]| v.iter().map(|x| factor * x).collect::<Vec<_>>();
        match self {
            TangentVector::Additive(x) => TangentVector::Additive(s(x)),
            TangentVector::Multiplicative(x) => TangentVector::Multiplicative(s(x)),
            TangentVector::DiagAffine { x, y } => TangentVector::DiagAffine { x: s(x), y: s(y) },
        }
    }

    /// Infinitesimal action `V . theta = d/dt (exp(tV) . theta)` at `t = 0`.
    pub fn act_infinitesimal(&self, theta: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), theta.len())?;
        Ok(match self {
            TangentVector::Additive(x) => x.clone(),
            TangentVector::Multiplicative(x) => x.iter().zip(theta).map(|(x, t)| x * t).collect(),
            TangentVector::DiagAffine { x, y } => x
                .iter()
                .zip(y)
                .zip(theta)
                .map(|((x, y), t)| x * t + y)
                .collect(),
        })
    }

    /// Exponential map onto the group. Defined for every tangent vector.
    pub fn exp(&self) -> GroupElement {
        match self {
            // The translation group is its own Lie algebra.
            TangentVector::Additive(x) => GroupElement::Additive(x.clone()),
            TangentVector::Multiplicative(x) => {
                GroupElement::Multiplicative(x.iter().map(|&v| bounded_exp(v)).collect())
            }
            TangentVector::DiagAffine { x, y } => GroupElement::DiagAffine {
                scale: x.iter().map(|&v| bounded_exp(v)).collect(),
                shift: x.iter().zip(y).map(|(&x, &y)| affine_exp_shift(x, y)).collect(),
            },
        }
    }

    /// Euclidean norm over all components.
    pub fn norm(&self) -> f64 {
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        match self {
            TangentVector::Additive(x) | TangentVector::Multiplicative(x) => sq(x).sqrt(),
            TangentVector::DiagAffine { x, y } => (sq(x) + sq(y)).sqrt(),
        }
    }

    pub fn is_finite(&self) -> bool {
        let fin = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            TangentVector::Additive(x) | TangentVector::Multiplicative(x) => fin(x),
            TangentVector::DiagAffine { x, y } => fin(x) && fin(y),
        }
    }
}

/// Free-function form of [`GroupElement::identity`].
pub fn identity(kind: GroupKind, p: usize) -> Result<GroupElement> {
    GroupElement::identity(kind, p)
}

/// Free-function form of [`GroupElement::compose`].
pub fn compose(g1: &GroupElement, g2: &GroupElement) -> Result<GroupElement> {
    g1.compose(g2)
}

/// Free-function form of [`TangentVector::exp`].
pub fn exp_map(v: &TangentVector) -> GroupElement {
    v.exp()
}

/// Free-function form of [`GroupElement::step`].
pub fn group_step(g: &GroupElement, y: &TangentVector, alpha: f64) -> Result<GroupElement> {
    g.step(y, alpha)
}
