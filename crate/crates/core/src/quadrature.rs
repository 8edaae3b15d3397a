//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Infinite ranges are mapped onto finite ones before subdivision:
//! `x = t / (1 - t^2)` on `(-1, 1)` for the real line and
//! `x = a + t / (1 - t)` on `[0, 1)` for half-lines. Interior break points
//! (kinks, jumps) split the range into pieces that are refined jointly.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the odd-indexed Kronrod nodes (XGK[1], XGK[3], XGK[5], XGK[7]).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Integration range before break points are applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Finite(f64, f64),
    /// `[a, +inf)`
    UpperHalf(f64),
    /// `(-inf, b]`
    LowerHalf(f64),
    RealLine,
}

impl Domain {
    /// Domain spanning `lo..hi`, either of which may be infinite.
    pub fn between(lo: f64, hi: f64) -> Domain {
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => Domain::Finite(lo, hi),
            (true, false) => Domain::UpperHalf(lo),
            (false, true) => Domain::LowerHalf(hi),
            (false, false) => Domain::RealLine,
        }
    }

    fn bounds(self) -> (f64, f64) {
        match self {
            Domain::Finite(a, b) => (a, b),
            Domain::UpperHalf(a) => (a, f64::INFINITY),
            Domain::LowerHalf(b) => (f64::NEG_INFINITY, b),
            Domain::RealLine => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_evals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-11,
            rel: 1e-11,
            max_evals: 200_000,
        }
    }
}

impl Tolerance {
    pub fn with_abs(abs: f64) -> Self {
        Tolerance {
            abs,
            ..Tolerance::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Identity,
    /// x = t / (1 - t^2)
    Line,
    /// x = a + t / (1 - t)
    Upper(f64),
    /// x = b - t / (1 - t)
    Lower(f64),
}

impl Map {
    #[inline]
    fn apply(self, t: f64) -> (f64, f64) {
        match self {
            Map::Identity => (t, 1.0),
            Map::Line => {
                let d = 1.0 - t * t;
                (t / d, (1.0 + t * t) / (d * d))
            }
            Map::Upper(a) => {
                let d = 1.0 - t;
                (a + t / d, 1.0 / (d * d))
            }
            Map::Lower(b) => {
                let d = 1.0 - t;
                (b - t / d, 1.0 / (d * d))
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    map: Map,
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, map: Map, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |t: f64| {
        let (x, jac) = map.apply(t);
        if !(x.is_finite() && jac.is_finite()) {
            return 0.0;
        }
        let v = f(x) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mut resk = WGK[7] * eval(center);
    let mut resg = WG[3] * eval(center);
    for (j, (&x, &w)) in XGK.iter().zip(&WGK).take(7).enumerate() {
        let pair = eval(center - half * x) + eval(center + half * x);
        resk += w * pair;
        if j % 2 == 1 {
            resg += WG[j / 2] * pair;
        }
    }
    (resk * half, ((resk - resg) * half).abs())
}

fn pieces(domain: Domain, breaks: &[f64]) -> Vec<(Map, f64, f64)> {
    let (lo, hi) = domain.bounds();
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|c| c.is_finite() && *c > lo && *c < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend(cuts);
    edges.push(hi);
    edges
        .windows(2)
        .filter(|w| w[0] < w[1])
        .map(|w| match (w[0].is_finite(), w[1].is_finite()) {
            (true, true) => (Map::Identity, w[0], w[1]),
            (true, false) => (Map::Upper(w[0]), 0.0, 1.0),
            (false, true) => (Map::Lower(w[1]), 0.0, 1.0),
            (false, false) => (Map::Line, -1.0, 1.0),
        })
        .collect()
}

/// Integrates `f` over `domain`, splitting at the given break points.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    domain: Domain,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Integral> {
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0usize;
    for (map, a, b) in pieces(domain, breaks) {
        // A few initial panels per piece keep narrow peaks from being missed.
        const PANELS: usize = 4;
        let h = (b - a) / PANELS as f64;
        for i in 0..PANELS {
            let (lo, hi) = (a + h * i as f64, if i + 1 == PANELS { b } else { a + h * (i + 1) as f64 });
            let (value, error) = kronrod(&f, map, lo, hi);
            evaluations += 15;
            heap.push(Segment { map, a: lo, b: hi, value, error });
        }
    }
    if heap.is_empty() {
        return Ok(Integral { value: 0.0, error: 0.0, evaluations: 0 });
    }

    let totals = |heap: &BinaryHeap<Segment>| {
        heap.iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error))
    };
    let (mut value, mut error) = totals(&heap);
    loop {
        if error <= tol.abs.max(tol.rel * value.abs()) {
            // Re-sum exactly to shed drift from the running totals.
            let (v, e) = totals(&heap);
            if e <= tol.abs.max(tol.rel * v.abs()) {
                return Ok(Integral { value: v, error: e, evaluations });
            }
            value = v;
            error = e;
        }
        if evaluations + 30 > tol.max_evals {
            return Err(Error::QuadratureNotConverged { estimate: value, error, evaluations });
        }
        let worst = heap.pop().expect("non-empty heap");
        value -= worst.value;
        error -= worst.error;
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Cannot split further in floating point; freeze this panel.
            value += worst.value;
            heap.push(Segment { error: 0.0, ..worst });
            continue;
        }
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (v, e) = kronrod(&f, worst.map, lo, hi);
            value += v;
            error += e;
            heap.push(Segment { map: worst.map, a: lo, b: hi, value: v, error: e });
        }
        evaluations += 30;
    }
}

/// One axis of a tensor-product integral.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub domain: Domain,
    pub breaks: Vec<f64>,
}

impl Axis {
    pub fn new(domain: Domain, breaks: Vec<f64>) -> Self {
        Axis { domain, breaks }
    }
}

/// Nested adaptive integration over a product of axes.
///
/// `tol.max_evals` caps the total number of integrand evaluations across all
/// nesting levels; inner integrals use a tolerance one order tighter than
/// the outer one.
pub fn integrate_nd<F: Fn(&[f64]) -> f64>(f: F, axes: &[Axis], tol: Tolerance) -> Result<Integral> {
    if axes.is_empty() {
        return Err(Error::EmptyDimension);
    }
    let budget = Cell::new(0usize);
    let failure: Cell<Option<Error>> = Cell::new(None);
    let value = nested(&f, axes, &[], tol, &budget, &failure);
    if let Some(err) = failure.take() {
        return Err(err);
    }
    Ok(Integral {
        value,
        error: tol.abs.max(tol.rel * value.abs()),
        evaluations: budget.get(),
    })
}

fn record(failure: &Cell<Option<Error>>, err: Error) {
    let prev = failure.take();
    failure.set(prev.or(Some(err)));
}

fn nested<F: Fn(&[f64]) -> f64>(
    f: &F,
    axes: &[Axis],
    prefix: &[f64],
    tol: Tolerance,
    budget: &Cell<usize>,
    failure: &Cell<Option<Error>>,
) -> f64 {
    let depth = prefix.len();
    let axis = &axes[depth];
    let last = depth + 1 == axes.len();
    let inner_tol = Tolerance {
        abs: tol.abs * 0.1,
        rel: tol.rel * 0.1,
        ..tol
    };
    let g = |x: f64| -> f64 {
        if budget.get() > tol.max_evals {
            return 0.0;
        }
        let mut point = Vec::with_capacity(axes.len());
        point.extend_from_slice(prefix);
        point.push(x);
        if last {
            budget.set(budget.get() + 1);
            f(&point)
        } else {
            nested(f, axes, &point, inner_tol, budget, failure)
        }
    };
    // The shared budget is the binding limit; per-level caps only bound
    // panel counts.
    let per_level = Tolerance {
        max_evals: if last { tol.max_evals } else { 20_000 },
        ..tol
    };
    let res = integrate(g, axis.domain, &axis.breaks, per_level);
    if budget.get() > tol.max_evals {
        record(
            failure,
            Error::QuadratureNotConverged {
                estimate: f64::NAN,
                error: f64::NAN,
                evaluations: budget.get(),
            },
        );
    }
    match res {
        Ok(r) => r.value,
        Err(e) => {
            record(failure, e);
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x.powi(5) - 3.0 * x * x, Domain::Finite(-1.0, 2.0), &[], Tolerance::default())
            .unwrap();
        assert_abs_diff_eq!(r.value, (64.0 - 1.0) / 6.0 - 9.0, epsilon = 1e-13);
    }

    #[test]
    fn gaussian_over_real_line() {
        let r = integrate(
            |x| (-0.5 * x * x).exp() / (2.0 * PI).sqrt(),
            Domain::RealLine,
            &[],
            Tolerance::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn half_lines() {
        let up = integrate(|x| (-x).exp(), Domain::UpperHalf(0.0), &[], Tolerance::default()).unwrap();
        assert_abs_diff_eq!(up.value, 1.0, epsilon = 1e-12);
        let low = integrate(|x| x.exp(), Domain::LowerHalf(1.0), &[], Tolerance::default()).unwrap();
        assert_abs_diff_eq!(low.value, 1f64.exp(), epsilon = 1e-11);
    }

    #[test]
    fn kinks_and_jumps_via_breaks() {
        let r = integrate(|x| (-x.abs()).exp() * 0.5, Domain::RealLine, &[0.0], Tolerance::default()).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
        let step = |x: f64| if x.abs() < 0.0025 { 200.0 } else { 0.0 };
        let r = integrate(step, Domain::RealLine, &[-0.0025, 0.0025], Tolerance::default()).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn heavy_tail() {
        let r = integrate(|x| 1.0 / (PI * (1.0 + x * x)), Domain::RealLine, &[], Tolerance::default())
            .unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let tight = Tolerance { abs: 1e-300, rel: 0.0, max_evals: 300 };
        let r = integrate(|x| (1.0 / x).sin(), Domain::Finite(1e-6, 1.0), &[], tight);
        assert!(matches!(r, Err(Error::QuadratureNotConverged { .. })));
    }

    #[test]
    fn two_dimensional_product() {
        let axes = vec![Axis::new(Domain::RealLine, vec![]), Axis::new(Domain::UpperHalf(0.0), vec![])];
        let r = integrate_nd(
            |p| (-0.5 * p[0] * p[0]).exp() / (2.0 * PI).sqrt() * p[1] * (-p[1]).exp() * (1.0 + p[0] * p[0]),
            &axes,
            Tolerance { abs: 1e-10, rel: 1e-10, max_evals: 1_000_000 },
        )
        .unwrap();
        assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn nd_budget_exhaustion_reported() {
        let axes = vec![Axis::new(Domain::RealLine, vec![]), Axis::new(Domain::RealLine, vec![])];
        let r = integrate_nd(
            |p| (-(p[0] * p[0] + p[1] * p[1])).exp(),
            &axes,
            Tolerance { abs: 1e-12, rel: 1e-12, max_evals: 500 },
        );
        assert!(r.is_err());
    }
}
