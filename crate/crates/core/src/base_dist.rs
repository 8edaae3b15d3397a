//! Fixed one-dimensional reference densities `q0` used mean-field across all
//! `P` coordinates, together with their Fisher constants.
//!
//! Scale conventions: `Gaussian { sigma }` is a standard deviation,
//! `Laplace { scale }` has density `exp(-|x| / s) / (2 s)`, and the positive
//! families (Rayleigh, Exponential) are unit-parameter since the group
//! element carries the scale.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::group::GroupKind;
use crate::quadrature::{integrate, Domain, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseDistribution {
    Gaussian { sigma: f64 },
    Uniform { half_width: f64 },
    Laplace { scale: f64 },
    Rayleigh,
    Exponential,
    LogNormal { mu: f64, sigma: f64 },
    /// Standard Cauchy. Only used to check Fisher constants.
    Cauchy,
    /// Point mass at the fixed point of the group action.
    DiracDelta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    RealLine,
    PositiveHalfLine,
    Point,
}

/// A Fisher constant, or the marker that it has to be folded into the step
/// size because the density is not smooth enough to define it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FisherConstant<T = f64> {
    Value(T),
    AbsorbedIntoStepSize,
}

impl<T: Copy> FisherConstant<T> {
    pub fn value(self) -> Option<T> {
        match self {
            FisherConstant::Value(v) => Some(v),
            FisherConstant::AbsorbedIntoStepSize => None,
        }
    }
}

/// The 2x2 Fisher block `[[c_x, b], [b, c_y]]` of the diagonal affine group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFisher {
    pub c_x: f64,
    pub b: f64,
    pub c_y: f64,
}

/// Tolerance for Fisher-constant quadratures.
pub const FISHER_QUADRATURE_TOL: Tolerance = Tolerance {
    abs: 1e-11,
    rel: 1e-12,
    max_evals: 400_000,
};

/// Independent random stream `stream` derived from `seed`.
///
/// ChaCha is counter based, so stream `k` does not depend on how many draws
/// other streams have made; this keeps parallel sampling deterministic.
pub fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl BaseDistribution {
    /// Checks that family parameters are finite and positive where required.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match *self {
            BaseDistribution::Gaussian { sigma } => positive("sigma", sigma),
            BaseDistribution::Uniform { half_width } => positive("half_width", half_width),
            BaseDistribution::Laplace { scale } => positive("scale", scale),
            BaseDistribution::LogNormal { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(Error::InvalidParameter(format!("mu must be finite, got {mu}")));
                }
                positive("sigma", sigma)
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            BaseDistribution::Gaussian { sigma } => format!("gaussian(sigma={sigma})"),
            BaseDistribution::Uniform { half_width } => format!("uniform(half_width={half_width})"),
            BaseDistribution::Laplace { scale } => format!("laplace(scale={scale})"),
            BaseDistribution::Rayleigh => "rayleigh".into(),
            BaseDistribution::Exponential => "exponential".into(),
            BaseDistribution::LogNormal { mu, sigma } => format!("lognormal(mu={mu},sigma={sigma})"),
            BaseDistribution::Cauchy => "cauchy".into(),
            BaseDistribution::DiracDelta => "dirac".into(),
        }
    }

    pub fn support(&self) -> Support {
        match self {
            BaseDistribution::Gaussian { .. }
            | BaseDistribution::Uniform { .. }
            | BaseDistribution::Laplace { .. }
            | BaseDistribution::Cauchy => Support::RealLine,
            BaseDistribution::Rayleigh
            | BaseDistribution::Exponential
            | BaseDistribution::LogNormal { .. } => Support::PositiveHalfLine,
            BaseDistribution::DiracDelta => Support::Point,
        }
    }

    /// Whether `q0(-x) = q0(x)`.
    pub fn is_even(&self) -> bool {
        matches!(
            self,
            BaseDistribution::Gaussian { .. }
                | BaseDistribution::Uniform { .. }
                | BaseDistribution::Laplace { .. }
                | BaseDistribution::Cauchy
                | BaseDistribution::DiracDelta
        )
    }

    pub fn has_density(&self) -> bool {
        !matches!(self, BaseDistribution::DiracDelta)
    }

    /// Whether the density is differentiable almost everywhere without jumps,
    /// i.e. Fisher constants are finite integrals.
    pub fn is_smooth(&self) -> bool {
        !matches!(self, BaseDistribution::Uniform { .. } | BaseDistribution::DiracDelta)
    }

    /// Closed interval outside which the density vanishes.
    pub fn interval(&self) -> (f64, f64) {
        match *self {
            BaseDistribution::Uniform { half_width } => (-half_width, half_width),
            _ => match self.support() {
                Support::RealLine => (f64::NEG_INFINITY, f64::INFINITY),
                Support::PositiveHalfLine => (0.0, f64::INFINITY),
                Support::Point => (0.0, 0.0),
            },
        }
    }

    /// Integration domain covering the density.
    pub fn domain(&self) -> Domain {
        let (lo, hi) = self.interval();
        Domain::between(lo, hi)
    }

    /// Points where quadrature should split: kinks, jumps and the log-normal mode.
    pub fn quadrature_breaks(&self) -> Vec<f64> {
        match *self {
            BaseDistribution::Laplace { .. } => vec![0.0],
            BaseDistribution::Uniform { half_width } => vec![-half_width, half_width],
            BaseDistribution::LogNormal { mu, .. } => vec![mu.exp()],
            _ => vec![],
        }
    }

    fn inside(&self, x: f64) -> bool {
        let (lo, hi) = self.interval();
        match self.support() {
            Support::RealLine if matches!(self, BaseDistribution::Uniform { .. }) => x > lo && x < hi,
            Support::RealLine => x.is_finite(),
            Support::PositiveHalfLine => x > 0.0 && x.is_finite(),
            Support::Point => false,
        }
    }

    /// Density at `x`; zero outside the support and for the point mass.
    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            BaseDistribution::Gaussian { sigma } => {
                let z = x / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
            }
            BaseDistribution::Uniform { half_width } => {
                if x.abs() <= half_width {
                    0.5 / half_width
                } else {
                    0.0
                }
            }
            BaseDistribution::Laplace { scale } => (-x.abs() / scale).exp() / (2.0 * scale),
            BaseDistribution::Rayleigh => {
                if x > 0.0 {
                    x * (-0.5 * x * x).exp()
                } else {
                    0.0
                }
            }
            BaseDistribution::Exponential => {
                if x >= 0.0 {
                    (-x).exp()
                } else {
                    0.0
                }
            }
            BaseDistribution::LogNormal { mu, sigma } => {
                if x > 0.0 {
                    let z = (x.ln() - mu) / sigma;
                    (-0.5 * z * z).exp() / (x * sigma * (2.0 * PI).sqrt())
                } else {
                    0.0
                }
            }
            BaseDistribution::Cauchy => 1.0 / (PI * (1.0 + x * x)),
            BaseDistribution::DiracDelta => 0.0,
        }
    }

    /// `q0'(x) / q0(x)` without support checks.
    fn score_unchecked(&self, x: f64) -> f64 {
        match *self {
            BaseDistribution::Gaussian { sigma } => -x / (sigma * sigma),
            BaseDistribution::Uniform { .. } => 0.0,
            BaseDistribution::Laplace { scale } => {
                if x > 0.0 {
                    -1.0 / scale
                } else if x < 0.0 {
                    1.0 / scale
                } else {
                    0.0
                }
            }
            BaseDistribution::Rayleigh => 1.0 / x - x,
            BaseDistribution::Exponential => -1.0,
            BaseDistribution::LogNormal { mu, sigma } => -(1.0 + (x.ln() - mu) / (sigma * sigma)) / x,
            BaseDistribution::Cauchy => -2.0 * x / (1.0 + x * x),
            BaseDistribution::DiracDelta => f64::NAN,
        }
    }

    /// Score `q0'(x) / q0(x)` at an interior point of the support.
    pub fn score(&self, x: f64) -> Result<f64> {
        if !self.has_density() {
            return Err(Error::Unsupported { dist: self.name(), what: "score" });
        }
        if !self.inside(x) {
            return Err(Error::OutsideSupport { dist: self.name(), value: x });
        }
        Ok(self.score_unchecked(x))
    }

    /// Density derivative `q0'(x)`, zero outside the support interior.
    pub fn pdf_derivative(&self, x: f64) -> f64 {
        if self.inside(x) {
            self.pdf(x) * self.score_unchecked(x)
        } else {
            0.0
        }
    }

    /// Fills `out` with i.i.d. draws. The point mass fills the action's fixed
    /// point for `kind` (0 for translations, 1 for scalings).
    pub fn fill<R: Rng + ?Sized>(&self, kind: GroupKind, rng: &mut R, out: &mut [f64]) {
        match *self {
            BaseDistribution::Gaussian { sigma } => {
                for o in out {
                    let z: f64 = rng.sample(StandardNormal);
                    *o = sigma * z;
                }
            }
            BaseDistribution::Uniform { half_width } => {
                for o in out {
                    *o = half_width * (2.0 * rng.random::<f64>() - 1.0);
                }
            }
            BaseDistribution::Laplace { scale } => {
                for o in out {
                    let e: f64 = rng.sample(Exp1);
                    *o = if rng.random::<bool>() { scale * e } else { -scale * e };
                }
            }
            BaseDistribution::Rayleigh => {
                // R^2 / 2 is unit exponential.
                for o in out {
                    let e: f64 = rng.sample(Exp1);
                    *o = (2.0 * e).sqrt();
                }
            }
            BaseDistribution::Exponential => {
                for o in out {
                    *o = rng.sample(Exp1);
                }
            }
            BaseDistribution::LogNormal { mu, sigma } => {
                for o in out {
                    let z: f64 = rng.sample(StandardNormal);
                    *o = (mu + sigma * z).exp();
                }
            }
            BaseDistribution::Cauchy => {
                for o in out {
                    let u: f64 = rng.random();
                    *o = (PI * (u - 0.5)).tan();
                }
            }
            BaseDistribution::DiracDelta => out.fill(kind.noise_fixed_point()),
        }
    }

    /// `k` vectors of dimension `p`; vector `i` comes from stream `i` of `seed`.
    pub fn sample(&self, p: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
        self.sample_for(GroupKind::Additive, p, k, seed)
    }

    /// As [`BaseDistribution::sample`], placing a point mass at the fixed
    /// point of `kind`.
    pub fn sample_for(&self, kind: GroupKind, p: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
        (0..k)
            .map(|i| {
                let mut rng = noise_rng(seed, i as u64);
                let mut v = vec![0.0; p];
                self.fill(kind, &mut rng, &mut v);
                v
            })
            .collect()
    }

    fn require_density(&self, what: &'static str) -> Result<()> {
        if self.has_density() {
            Ok(())
        } else {
            Err(Error::Unsupported { dist: self.name(), what })
        }
    }

    /// `int f(x) q0(x) dx` over the support.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F, tol: Tolerance) -> Result<f64> {
        self.require_density("expectation")?;
        integrate(
            |x| {
                let p = self.pdf(x);
                if p > 0.0 {
                    f(x) * p
                } else {
                    0.0
                }
            },
            self.domain(),
            &self.quadrature_breaks(),
            tol,
        )
        .map(|r| r.value)
    }

    /// Translation-group Fisher constant `int q0'^2 / q0`.
    pub fn fisher_constant_additive(&self) -> Result<FisherConstant> {
        if !self.is_smooth() {
            return Ok(FisherConstant::AbsorbedIntoStepSize);
        }
        if self.support() != Support::RealLine {
            return Err(Error::Unsupported {
                dist: self.name(),
                what: "additive Fisher constant (needs a full-line density)",
            });
        }
        Ok(FisherConstant::Value(match *self {
            BaseDistribution::Gaussian { sigma } => 1.0 / (sigma * sigma),
            BaseDistribution::Laplace { scale } => 1.0 / (scale * scale),
            BaseDistribution::Cauchy => 0.5,
            _ => self.additive_fisher_by_quadrature()?,
        }))
    }

    /// Scaling-group Fisher constant `int_0^inf (1 + x q0'/q0)^2 q0`.
    pub fn fisher_constant_multiplicative(&self) -> Result<FisherConstant> {
        if matches!(self, BaseDistribution::DiracDelta) {
            return Ok(FisherConstant::AbsorbedIntoStepSize);
        }
        if self.support() != Support::PositiveHalfLine {
            return Err(Error::Unsupported {
                dist: self.name(),
                what: "multiplicative Fisher constant (needs a positive-support density)",
            });
        }
        Ok(FisherConstant::Value(match *self {
            BaseDistribution::Exponential => 1.0,
            BaseDistribution::Rayleigh => 4.0,
            BaseDistribution::LogNormal { sigma, .. } => 1.0 / (sigma * sigma),
            _ => self.scale_fisher_by_quadrature()?,
        }))
    }

    /// Affine-group Fisher block constants.
    pub fn fisher_constants_affine(&self) -> Result<FisherConstant<AffineFisher>> {
        if !self.is_smooth() {
            return Ok(FisherConstant::AbsorbedIntoStepSize);
        }
        if self.support() != Support::RealLine {
            return Err(Error::Unsupported {
                dist: self.name(),
                what: "affine Fisher constants (needs a full-line density)",
            });
        }
        Ok(FisherConstant::Value(match *self {
            BaseDistribution::Gaussian { sigma } => AffineFisher { c_x: 2.0, b: 0.0, c_y: 1.0 / (sigma * sigma) },
            BaseDistribution::Laplace { scale } => AffineFisher { c_x: 1.0, b: 0.0, c_y: 1.0 / (scale * scale) },
            BaseDistribution::Cauchy => AffineFisher { c_x: 0.5, b: 0.0, c_y: 0.5 },
            _ => self.affine_fisher_by_quadrature()?,
        }))
    }

    /// `int q0'^2 / q0` by quadrature.
    pub fn additive_fisher_by_quadrature(&self) -> Result<f64> {
        self.require_density("Fisher constant")?;
        self.expect(
            |x| {
                let s = self.score_unchecked(x);
                s * s
            },
            FISHER_QUADRATURE_TOL,
        )
    }

    /// `int (1 + x q0'/q0)^2 q0` by quadrature.
    pub fn scale_fisher_by_quadrature(&self) -> Result<f64> {
        self.require_density("Fisher constant")?;
        self.expect(
            |x| {
                let s = 1.0 + x * self.score_unchecked(x);
                s * s
            },
            FISHER_QUADRATURE_TOL,
        )
    }

    /// All three affine block entries by quadrature.
    pub fn affine_fisher_by_quadrature(&self) -> Result<AffineFisher> {
        let c_x = self.scale_fisher_by_quadrature()?;
        let c_y = self.additive_fisher_by_quadrature()?;
        let b = if self.is_even() {
            0.0
        } else {
            self.expect(
                |x| {
                    let s = self.score_unchecked(x);
                    (1.0 + x * s) * s
                },
                FISHER_QUADRATURE_TOL,
            )?
        };
        Ok(AffineFisher { c_x, b, c_y })
    }
}

impl std::str::FromStr for BaseDistribution {
    type Err = Error;

    /// Parses `gaussian:0.03`, `laplace:0.005`, `uniform:0.0025`, `rayleigh`,
    /// `exponential`, `lognormal:0:1`, `dirac`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let family = parts.next().unwrap_or_default().to_ascii_lowercase();
        let args: Vec<f64> = parts
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("bad number {p:?} in {s:?}")))
            })
            .collect::<Result<_>>()?;
        let arg = |i: usize, default: f64| args.get(i).copied().unwrap_or(default);
        let dist = match family.as_str() {
            "gaussian" | "normal" => BaseDistribution::Gaussian { sigma: arg(0, 1.0) },
            "uniform" => BaseDistribution::Uniform { half_width: arg(0, 1.0) },
            "laplace" => BaseDistribution::Laplace { scale: arg(0, 1.0) },
            "rayleigh" => BaseDistribution::Rayleigh,
            "exponential" | "exp" => BaseDistribution::Exponential,
            "lognormal" => BaseDistribution::LogNormal { mu: arg(0, 0.0), sigma: arg(1, 1.0) },
            "cauchy" => BaseDistribution::Cauchy,
            "dirac" | "delta" | "diracdelta" => BaseDistribution::DiracDelta,
            other => return Err(Error::InvalidParameter(format!("unknown base distribution {other:?}"))),
        };
        dist.validate()?;
        Ok(dist)
    }
}
