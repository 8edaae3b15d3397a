//! Predictive marginals and their scores.

use lieopt_core::{noise_rng, BaseDistribution, Execution, GroupElement};
use lieopt_learn::net::{forward, softmax_rows, Mlp, SignMask};
use lieopt_learn::Dataset;

use crate::error::{HarnessError, Result};

pub const ECE_BINS: usize = 15;
pub const DEFAULT_PREDICTIVE_SAMPLES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    /// Percent correct.
    pub accuracy: f64,
    pub nll: f64,
    pub ece: f64,
}

/// Average of softmax outputs at `g . eps_s` for `samples` draws from the
/// base; a point mass needs a single evaluation. Rows follow `x`.
#[allow(clippy::too_many_arguments)]
pub fn predictive(
    net: &Mlp,
    mask: &SignMask,
    g: &GroupElement,
    dist: &BaseDistribution,
    x: &[f64],
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<f64>> {
    if samples == 0 {
        return Err(HarnessError::Invalid("predictive sample count must be at least 1".into()));
    }
    let s = if matches!(dist, BaseDistribution::DiracDelta) { 1 } else { samples };
    let p = g.dim();
    let classes = net.classes();
    let draws: Vec<Result<Vec<f64>>> = exec.map(s, |i| {
        let mut rng = noise_rng(seed, i as u64);
        let mut eps = vec![0.0; p];
        dist.fill(g.kind(), &mut rng, &mut eps);
        let theta = g.act(&eps)?;
        let mut probs = forward(net, mask, &theta, x)?;
        softmax_rows(&mut probs, classes);
        Ok(probs)
    });
    let mut iter = draws.into_iter();
    let mut acc = iter.next().expect("s >= 1")?;
    for d in iter {
        acc.iter_mut().zip(d?).for_each(|(a, v)| *a += v);
    }
    if s > 1 {
        acc.iter_mut().for_each(|v| *v /= s as f64);
    }
    Ok(acc)
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Expected calibration error over equal-width confidence bins.
pub fn ece(probs: &[f64], labels: &[usize], classes: usize, bins: usize) -> Result<f64> {
    if labels.is_empty() {
        return Err(HarnessError::Empty("test set"));
    }
    let mut count = vec![0usize; bins];
    let mut conf = vec![0.0; bins];
    let mut hits = vec![0.0; bins];
    for (row, &y) in probs.chunks(classes).zip(labels) {
        let k = argmax(row);
        let c = row[k];
        let b = ((c * bins as f64) as usize).min(bins - 1);
        count[b] += 1;
        conf[b] += c;
        hits[b] += (k == y) as u8 as f64;
    }
    let n = labels.len() as f64;
    Ok((0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| (hits[b] - conf[b]).abs() / n)
        .sum())
}

pub fn score(probs: &[f64], labels: &[usize], classes: usize) -> Result<Scores> {
    if labels.is_empty() {
        return Err(HarnessError::Empty("test set"));
    }
    if probs.len() != labels.len() * classes {
        return Err(HarnessError::Invalid(format!(
            "{} probabilities for {} rows of {classes} classes",
            probs.len(),
            labels.len()
        )));
    }
    let mut correct = 0usize;
    let mut nll = 0.0;
    for (row, &y) in probs.chunks(classes).zip(labels) {
        correct += (argmax(row) == y) as usize;
        nll -= row[y].max(f64::MIN_POSITIVE).ln();
    }
    let n = labels.len() as f64;
    Ok(Scores { accuracy: 100.0 * correct as f64 / n, nll: nll / n, ece: ece(probs, labels, classes, ECE_BINS)? })
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    g: &GroupElement,
    dist: &BaseDistribution,
    net: &Mlp,
    mask: &SignMask,
    test: &Dataset,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<Scores> {
    if test.is_empty() {
        return Err(HarnessError::Empty("test set"));
    }
    let probs = predictive(net, mask, g, dist, &test.inputs, samples, seed, exec)?;
    score(&probs, &test.labels, test.classes)
}
