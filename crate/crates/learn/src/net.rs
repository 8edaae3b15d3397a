//! Fully connected tanh network with a softmax cross-entropy head.
//!
//! Parameter layout: layers in order; within a layer the weight matrix comes
//! first, stored `[fan_in][fan_out]` row-major (row `j` holds the outgoing
//! weights of source neuron `j`), followed by the `fan_out` biases.

use std::borrow::Cow;

use lieopt_core::{noise_rng, GroupElement, GroupKind};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{LearnError, Result};
use crate::estimator::GradientProvider;

/// Magnitudes drawn for the multiplicative group are floored here at
/// initialization.
pub const INIT_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layer {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Offset of the weight block in the parameter vector.
    pub weights: usize,
    /// Offset of the bias block.
    pub biases: usize,
}

impl Layer {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.weights..self.weights + self.fan_in * self.fan_out
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        self.biases..self.biases + self.fan_out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    sizes: Vec<usize>,
    layers: Vec<Layer>,
    params: usize,
}

impl Mlp {
    pub fn new(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(LearnError::InvalidConfig("a network needs at least an input and an output size".into()));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(LearnError::InvalidConfig(format!("layer sizes must be positive, got {sizes:?}")));
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = offset;
            let biases = weights + fan_in * fan_out;
            offset = biases + fan_out;
            layers.push(Layer { fan_in, fan_out, weights, biases });
        }
        Ok(Mlp { sizes: sizes.to_vec(), layers, params: offset })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn num_params(&self) -> usize {
        self.params
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn classes(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    pub fn layer(&self, index: usize) -> Result<&Layer> {
        self.layers.get(index).ok_or(LearnError::NoSuchLayer { layer: index, layers: self.layers.len() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskMode {
    #[default]
    None,
    PerWeight,
    PerNode,
}

impl MaskMode {
    pub fn name(self) -> &'static str {
        match self {
            MaskMode::None => "none",
            MaskMode::PerWeight => "per_weight",
            MaskMode::PerNode => "per_node",
        }
    }
}

impl std::str::FromStr for MaskMode {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(MaskMode::None),
            "per_weight" => Ok(MaskMode::PerWeight),
            "per_node" => Ok(MaskMode::PerNode),
            other => Err(LearnError::InvalidConfig(format!(
                "unknown mask mode '{other}' (expected none, per_weight or per_node)"
            ))),
        }
    }
}

/// Frozen signs; the forward pass uses `s * theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignMask {
    signs: Vec<f64>,
    mode: MaskMode,
}

impl SignMask {
    pub fn ones(p: usize) -> Self {
        SignMask { signs: vec![1.0; p], mode: MaskMode::None }
    }

    pub fn from_signs(mode: MaskMode, signs: Vec<f64>) -> Result<Self> {
        if let Some(i) = signs.iter().position(|&s| s != 1.0 && s != -1.0) {
            return Err(LearnError::InvalidConfig(format!("sign {i} is {} (expected +1 or -1)", signs[i])));
        }
        if mode == MaskMode::None && signs.iter().any(|&s| s < 0.0) {
            return Err(LearnError::InvalidConfig("mask mode none requires all signs +1".into()));
        }
        Ok(SignMask { signs, mode })
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn mode(&self) -> MaskMode {
        self.mode
    }

    pub fn is_active(&self) -> bool {
        self.mode != MaskMode::None
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    /// `s * theta`.
    pub fn apply<'a>(&self, theta: &'a [f64]) -> Cow<'a, [f64]> {
        if !self.is_active() {
            return Cow::Borrowed(theta);
        }
        Cow::Owned(theta.iter().zip(&self.signs).map(|(t, s)| s * t).collect())
    }
}

/// Regularizer `R(theta) = reg * |theta|^2` shared over `dataset_size` examples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub reg: f64,
    pub dataset_size: usize,
}

fn check_inputs(net: &Mlp, mask: &SignMask, theta: &[f64], x: &[f64]) -> Result<usize> {
    if theta.len() != net.num_params() {
        return Err(lieopt_core::Error::DimensionMismatch { expected: net.num_params(), got: theta.len() }.into());
    }
    if mask.len() != theta.len() {
        return Err(lieopt_core::Error::DimensionMismatch { expected: theta.len(), got: mask.len() }.into());
    }
    let d = net.input_dim();
    if x.len() % d != 0 {
        return Err(LearnError::InputWidth { expected: d, got: x.len() });
    }
    if mask.is_active() {
        if let Some(i) = theta.iter().position(|&t| !(t > 0.0)) {
            return Err(LearnError::MaskedNonPositive { index: i, value: theta[i] });
        }
    }
    Ok(x.len() / d)
}

/// `out[r] = bias + input[r] W` for each row; zero inputs are skipped.
fn affine_layer(w: &[f64], bias: &[f64], input: &[f64], layer: &Layer, rows: usize, out: &mut Vec<f64>) {
    out.clear();
    out.reserve(rows * layer.fan_out);
    for r in 0..rows {
        out.extend_from_slice(bias);
        let o = &mut out[r * layer.fan_out..];
        for (j, &a) in input[r * layer.fan_in..(r + 1) * layer.fan_in].iter().enumerate() {
            if a != 0.0 {
                let row = &w[j * layer.fan_out..(j + 1) * layer.fan_out];
                for (o, wv) in o.iter_mut().zip(row) {
                    *o += a * wv;
                }
            }
        }
    }
}

/// Activations of every layer: `acts[l]` is the input to layer `l`, the last
/// entry holds the logits.
fn forward_all(net: &Mlp, w: &[f64], x: &[f64], rows: usize) -> Vec<Vec<f64>> {
    let last = net.layers.len() - 1;
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(net.layers.len());
    for (l, layer) in net.layers.iter().enumerate() {
        let input: &[f64] = if l == 0 { x } else { &acts[l - 1] };
        let mut out = Vec::new();
        affine_layer(&w[layer.weight_range()], &w[layer.bias_range()], input, layer, rows, &mut out);
        if l < last {
            out.iter_mut().for_each(|v| *v = v.tanh());
        }
        acts.push(out);
    }
    acts
}

/// Logits for each row of `x`.
pub fn forward(net: &Mlp, mask: &SignMask, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let rows = check_inputs(net, mask, theta, x)?;
    let w = mask.apply(theta);
    Ok(forward_all(net, &w, x, rows).pop().expect("at least one layer"))
}

/// Row-wise softmax, computed in place.
pub fn softmax_rows(logits: &mut [f64], classes: usize) {
    for row in logits.chunks_mut(classes) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
}

/// Minibatch objective `(1/n) sum_j CE_j + reg |theta|^2 / N`; its gradient
/// with respect to `theta` is written into `grad`.
pub fn loss_and_grad(
    net: &Mlp,
    mask: &SignMask,
    spec: &LossSpec,
    theta: &[f64],
    x: &[f64],
    labels: &[usize],
    grad: &mut [f64],
) -> Result<f64> {
    let rows = check_inputs(net, mask, theta, x)?;
    if rows != labels.len() {
        return Err(LearnError::InvalidConfig(format!("{rows} input rows but {} labels", labels.len())));
    }
    if rows == 0 {
        return Err(LearnError::Empty("minibatch"));
    }
    if grad.len() != theta.len() {
        return Err(lieopt_core::Error::DimensionMismatch { expected: theta.len(), got: grad.len() }.into());
    }
    if spec.dataset_size == 0 {
        return Err(LearnError::Empty("dataset"));
    }
    let classes = net.classes();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(LearnError::InvalidConfig(format!("label {bad} out of range for {classes} classes")));
    }
    let w = mask.apply(theta);
    let mut acts = forward_all(net, &w, x, rows);
    let n = rows as f64;

    // Cross-entropy and its logit gradient (softmax - onehot) / n.
    let mut delta = acts.pop().expect("at least one layer");
    let mut data_loss = 0.0;
    for (row, &y) in delta.chunks_mut(classes).zip(labels) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        data_loss += lse - row[y];
        for v in row.iter_mut() {
            *v = (*v - lse).exp() / n;
        }
        row[y] -= 1.0 / n;
    }
    data_loss /= n;

    grad.iter_mut().for_each(|g| *g = 0.0);
    for l in (0..net.layers.len()).rev() {
        let layer = net.layers[l];
        let input: &[f64] = if l == 0 { x } else { &acts[l - 1] };
        let (fi, fo) = (layer.fan_in, layer.fan_out);
        {
            let (gw, gb) = grad[layer.weights..layer.biases + fo].split_at_mut(fi * fo);
            for r in 0..rows {
                let d = &delta[r * fo..(r + 1) * fo];
                gb.iter_mut().zip(d).for_each(|(g, d)| *g += d);
                for (j, &a) in input[r * fi..(r + 1) * fi].iter().enumerate() {
                    if a != 0.0 {
                        for (g, d) in gw[j * fo..(j + 1) * fo].iter_mut().zip(d) {
                            *g += a * d;
                        }
                    }
                }
            }
        }
        if l > 0 {
            let wl = &w[layer.weight_range()];
            let mut next = vec![0.0; rows * fi];
            for r in 0..rows {
                let d = &delta[r * fo..(r + 1) * fo];
                for j in 0..fi {
                    let s: f64 = wl[j * fo..(j + 1) * fo].iter().zip(d).map(|(w, d)| w * d).sum();
                    let a = input[r * fi + j];
                    next[r * fi + j] = s * (1.0 - a * a);
                }
            }
            delta = next;
        }
    }

    let reg = spec.reg / spec.dataset_size as f64;
    let mut sq = 0.0;
    for ((g, t), s) in grad.iter_mut().zip(theta).zip(mask.signs()) {
        *g = s * *g + 2.0 * reg * t;
        sq += t * t;
    }
    Ok(data_loss + reg * sq)
}

/// Gradient provider for a network over a dataset.
#[derive(Debug, Clone, Copy)]
pub struct NetObjective<'a> {
    pub net: &'a Mlp,
    pub mask: &'a SignMask,
    pub spec: LossSpec,
    pub data: &'a Dataset,
}

impl GradientProvider for NetObjective<'_> {
    fn dim(&self) -> usize {
        self.net.num_params()
    }

    fn dataset_size(&self) -> usize {
        self.spec.dataset_size
    }

    fn loss_and_grad(&self, theta: &[f64], batch: &[usize], grad: &mut [f64]) -> Result<f64> {
        let (x, y) = self.data.gather(batch);
        loss_and_grad(self.net, self.mask, &self.spec, theta, &x, &y, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitOptions {
    /// Initial affine scale `A0`.
    pub affine_scale: f64,
    /// Whether per-node sign sharing also applies to the output layer; when
    /// false its weights get independent signs.
    pub per_node_output: bool,
    /// Standard deviation of the initial draws for every layer; `None` uses
    /// `1/sqrt(fan_in)`.
    pub weight_sd: Option<f64>,
}

impl Default for InitOptions {
    fn default() -> Self {
        InitOptions { affine_scale: 1e-3, per_node_output: true, weight_sd: None }
    }
}

/// Initial group element and sign mask. Masks only apply to the
/// multiplicative group; other groups get all-positive signs.
pub fn init_params(
    net: &Mlp,
    mode: MaskMode,
    kind: GroupKind,
    seed: u64,
    opts: InitOptions,
) -> Result<(GroupElement, SignMask)> {
    let p = net.num_params();
    if let Some(sd) = opts.weight_sd {
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(LearnError::InvalidConfig(format!("initial weight sd must be positive, got {sd}")));
        }
    }
    let mut rng = noise_rng(seed, 0);
    let mut theta = vec![0.0; p];
    for layer in &net.layers {
        let sd = opts.weight_sd.unwrap_or_else(|| (1.0 / layer.fan_in as f64).sqrt());
        for t in &mut theta[layer.weight_range()] {
            let z: f64 = rng.sample(StandardNormal);
            *t = sd * z;
        }
        if kind == GroupKind::Multiplicative {
            for t in &mut theta[layer.bias_range()] {
                let z: f64 = rng.sample(StandardNormal);
                *t = sd * z;
            }
        }
    }
    match kind {
        GroupKind::Additive => Ok((GroupElement::additive(theta)?, SignMask::ones(p))),
        GroupKind::DiagAffine => {
            if !(opts.affine_scale > 0.0 && opts.affine_scale.is_finite()) {
                return Err(LearnError::InvalidConfig(format!(
                    "initial affine scale must be positive, got {}",
                    opts.affine_scale
                )));
            }
            Ok((GroupElement::diag_affine(vec![opts.affine_scale; p], theta)?, SignMask::ones(p)))
        }
        GroupKind::Multiplicative => {
            theta.iter_mut().for_each(|t| *t = t.abs().max(INIT_FLOOR));
            let mask = draw_signs(net, mode, seed, opts.per_node_output);
            Ok((GroupElement::multiplicative(theta)?, mask))
        }
    }
}

fn draw_signs(net: &Mlp, mode: MaskMode, seed: u64, per_node_output: bool) -> SignMask {
    let p = net.num_params();
    if mode == MaskMode::None {
        return SignMask::ones(p);
    }
    let mut rng = noise_rng(seed, 1);
    let mut flip = move || if rng.random::<bool>() { 1.0 } else { -1.0 };
    let mut signs = vec![1.0; p];
    let last = net.layers.len() - 1;
    for (l, layer) in net.layers.iter().enumerate() {
        let shared = mode == MaskMode::PerNode && (l < last || per_node_output);
        let w = &mut signs[layer.weight_range()];
        if shared {
            for row in w.chunks_mut(layer.fan_out) {
                row.fill(flip());
            }
        } else {
            w.iter_mut().for_each(|s| *s = flip());
        }
        signs[layer.bias_range()].iter_mut().for_each(|s| *s = flip());
    }
    SignMask { signs, mode }
}

/// Fraction of layer `index`'s effective weights whose magnitude is below 1%
/// of the layer maximum.
pub fn sparsity_metric(net: &Mlp, theta: &[f64], mask: &SignMask, index: usize) -> Result<f64> {
    let layer = net.layer(index)?;
    if theta.len() != net.num_params() || mask.len() != theta.len() {
        return Err(lieopt_core::Error::DimensionMismatch { expected: net.num_params(), got: theta.len() }.into());
    }
    let range = layer.weight_range();
    if range.is_empty() {
        return Err(LearnError::Empty("layer"));
    }
    let w: Vec<f64> = theta[range.clone()].iter().zip(&mask.signs()[range]).map(|(t, s)| (s * t).abs()).collect();
    let max = w.iter().cloned().fold(0.0, f64::max);
    let small = w.iter().filter(|&&v| v < 0.01 * max).count();
    Ok(small as f64 / w.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn uniform(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        let mut rng = noise_rng(seed, 9);
        (0..n).map(|_| rng.random_range(lo..hi)).collect()
    }

    #[test]
    fn layout() {
        let net = Mlp::new(&[3, 4, 2]).unwrap();
        assert_eq!(net.num_params(), 3 * 4 + 4 + 4 * 2 + 2);
        assert_eq!(net.layers()[1].weights, 16);
        assert_eq!(net.layers()[1].biases, 24);
        assert!(Mlp::new(&[3]).is_err());
        assert!(Mlp::new(&[3, 0, 2]).is_err());
    }

    #[test]
    fn zero_input_zero_bias_gives_zero_logits() {
        let net = Mlp::new(&[2, 3]).unwrap();
        let mut theta = uniform(1, net.num_params(), -1.0, 1.0);
        theta[6..].fill(0.0);
        let out = forward(&net, &SignMask::ones(9), &theta, &[0.0; 4]).unwrap();
        assert_eq!(out, vec![0.0; 6]);
    }

    #[test]
    fn sign_mask_flips_preactivation() {
        let net = Mlp::new(&[1, 1, 1]).unwrap();
        let mask = SignMask::from_signs(MaskMode::PerWeight, vec![-1.0, 1.0, 1.0, 1.0]).unwrap();
        // Positive magnitudes are required under a mask; the zero bias is
        // therefore checked through a tiny bias on an unmasked net below.
        let logits = forward(&net, &mask, &[1.0, 1e-300, 1.0, 1e-300], &[2.0]).unwrap();
        assert_abs_diff_eq!(logits[0], (-2.0f64).tanh(), epsilon = 1e-15);
        let plain = forward(&net, &SignMask::ones(4), &[1.0, 0.0, 1.0, 0.0], &[2.0]).unwrap();
        assert_abs_diff_eq!(plain[0], 2.0f64.tanh(), epsilon = 1e-15);
        assert!(matches!(
            forward(&net, &mask, &[1.0, 0.0, 1.0, 1.0], &[2.0]),
            Err(LearnError::MaskedNonPositive { index: 1, .. })
        ));
    }

    #[test]
    fn softmax_rows_normalize() {
        let net = Mlp::new(&[4, 5, 3]).unwrap();
        let theta = uniform(2, net.num_params(), -2.0, 2.0);
        let x = uniform(3, 4 * 7, -1.0, 1.0);
        let mut logits = forward(&net, &SignMask::ones(theta.len()), &theta, &x).unwrap();
        assert_eq!(logits.len(), 7 * 3);
        softmax_rows(&mut logits, 3);
        for row in logits.chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let net = Mlp::new(&[4, 3]).unwrap();
        let ones = SignMask::ones(15);
        assert!(forward(&net, &ones, &[0.0; 14], &[0.0; 4]).is_err());
        assert!(matches!(
            forward(&net, &ones, &[0.0; 15], &[0.0; 5]),
            Err(LearnError::InputWidth { .. })
        ));
    }

    fn objective(theta: &[f64], net: &Mlp, mask: &SignMask, spec: &LossSpec, x: &[f64], y: &[usize]) -> f64 {
        let mut g = vec![0.0; theta.len()];
        loss_and_grad(net, mask, spec, theta, x, y, &mut g).unwrap()
    }

    fn finite_difference_check(sizes: &[usize], mode: MaskMode, coords: usize) {
        let net = Mlp::new(sizes).unwrap();
        let p = net.num_params();
        let (theta, mask) = match mode {
            MaskMode::None => (uniform(4, p, -1.0, 1.0), SignMask::ones(p)),
            _ => {
                let (g, m) = init_params(&net, mode, GroupKind::Multiplicative, 5, InitOptions::default()).unwrap();
                let GroupElement::Multiplicative(t) = g else { unreachable!() };
                (t.iter().map(|v| v + 0.2).collect(), m)
            }
        };
        let rows = 6;
        let x = uniform(6, rows * sizes[0], -1.0, 1.0);
        let y: Vec<usize> = (0..rows).map(|r| r % net.classes()).collect();
        let spec = LossSpec { reg: 0.3, dataset_size: 17 };
        let mut g = vec![0.0; p];
        loss_and_grad(&net, &mask, &spec, &theta, &x, &y, &mut g).unwrap();
        let picks: Vec<usize> = if p <= coords {
            (0..p).collect()
        } else {
            let mut rng = noise_rng(7, 0);
            (0..coords).map(|_| rng.random_range(0..p)).collect()
        };
        for i in picks {
            let h = 1e-6 * theta[i].abs().max(1.0);
            let mut plus = theta.clone();
            plus[i] += h;
            let mut minus = theta.clone();
            minus[i] -= h;
            let fd = (objective(&plus, &net, &mask, &spec, &x, &y) - objective(&minus, &net, &mask, &spec, &x, &y))
                / (2.0 * h);
            let rel = (fd - g[i]).abs() / g[i].abs().max(1e-3);
            assert!(rel < 1e-5, "coordinate {i}: analytic {} numeric {fd}", g[i]);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        finite_difference_check(&[2, 2], MaskMode::None, 20);
        finite_difference_check(&[3, 2, 2], MaskMode::None, 20);
        finite_difference_check(&[5, 4, 3, 3], MaskMode::None, 40);
        finite_difference_check(&[4, 3, 3], MaskMode::PerNode, 30);
        finite_difference_check(&[4, 3, 3], MaskMode::PerWeight, 30);
    }

    #[test]
    fn regularizer_gradient_is_exact() {
        // With zero inputs and a single class the data loss is identically 0.
        let net = Mlp::new(&[2, 1]).unwrap();
        let theta = [0.5, -2.0, 3.0];
        let spec = LossSpec { reg: 1.0, dataset_size: 8 };
        let mut g = vec![0.0; 3];
        let loss = loss_and_grad(&net, &SignMask::ones(3), &spec, &theta, &[0.0, 0.0], &[0], &mut g).unwrap();
        assert_eq!(g, vec![2.0 * 0.5 / 8.0, 2.0 * -2.0 / 8.0, 2.0 * 3.0 / 8.0]);
        assert_abs_diff_eq!(loss, (0.25 + 4.0 + 9.0) / 8.0, epsilon = 1e-15);
    }

    #[test]
    fn mask_flip_negates_data_gradient() {
        let net = Mlp::new(&[3, 2]).unwrap();
        let theta = uniform(11, 8, 0.1, 1.0);
        let x = uniform(12, 6, -1.0, 1.0);
        let y = [0, 1];
        let spec = LossSpec { reg: 0.0, dataset_size: 2 };
        let base = SignMask::from_signs(MaskMode::PerWeight, vec![1.0; 8]).unwrap();
        let mut flipped_signs = vec![1.0; 8];
        flipped_signs[4] = -1.0;
        let flipped = SignMask::from_signs(MaskMode::PerWeight, flipped_signs).unwrap();
        // Same effective weights: coordinate 4 is matched by the flipped sign,
        // so compare against the unmasked net at w4 = -theta4.
        let mut eff = theta.clone();
        eff[4] = -theta[4];
        let mut g_plain = vec![0.0; 8];
        loss_and_grad(&net, &SignMask::ones(8), &spec, &eff, &x, &y, &mut g_plain).unwrap();
        let mut g_flip = vec![0.0; 8];
        loss_and_grad(&net, &flipped, &spec, &theta, &x, &y, &mut g_flip).unwrap();
        assert_eq!(g_flip[4], -g_plain[4]);
        assert_eq!(g_flip[0], g_plain[0]);
        let mut g_base = vec![0.0; 8];
        loss_and_grad(&net, &base, &spec, &theta, &x, &y, &mut g_base).unwrap();
        assert!(g_base.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn linear_model_gradient_is_softmax_minus_onehot() {
        let net = Mlp::new(&[2, 3]).unwrap();
        let theta = [0.1, -0.2, 0.3, 0.4, 0.5, -0.6, 0.0, 0.1, -0.1];
        let x = [1.0, 2.0];
        let spec = LossSpec { reg: 0.0, dataset_size: 1 };
        let mut g = vec![0.0; 9];
        loss_and_grad(&net, &SignMask::ones(9), &spec, &theta, &x, &[2], &mut g).unwrap();
        let z = [0.1 + 0.8 + 0.0, -0.2 + 1.0 + 0.1, 0.3 - 1.2 - 0.1];
        let m = z.iter().map(|v: &f64| v.exp()).sum::<f64>();
        let d: Vec<f64> = (0..3).map(|k| z[k].exp() / m - if k == 2 { 1.0 } else { 0.0 }).collect();
        for k in 0..3 {
            assert_abs_diff_eq!(g[k], x[0] * d[k], epsilon = 1e-15);
            assert_abs_diff_eq!(g[3 + k], x[1] * d[k], epsilon = 1e-15);
            assert_abs_diff_eq!(g[6 + k], d[k], epsilon = 1e-15);
        }
    }

    #[test]
    fn per_node_signs_share_rows() {
        let net = Mlp::new(&[3, 4]).unwrap();
        let (_, mask) = init_params(&net, MaskMode::PerNode, GroupKind::Multiplicative, 3, InitOptions::default()).unwrap();
        let w = &mask.signs()[..12];
        for row in w.chunks(4) {
            assert!(row.iter().all(|&s| s == row[0]));
        }
        let (_, none) = init_params(&net, MaskMode::None, GroupKind::Multiplicative, 3, InitOptions::default()).unwrap();
        assert!(none.signs().iter().all(|&s| s == 1.0));
    }

    #[test]
    fn init_is_deterministic_and_positive() {
        let net = Mlp::new(&[20, 10, 5]).unwrap();
        let a = init_params(&net, MaskMode::PerWeight, GroupKind::Multiplicative, 8, InitOptions::default()).unwrap();
        let b = init_params(&net, MaskMode::PerWeight, GroupKind::Multiplicative, 8, InitOptions::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.0.min_scale().unwrap() >= INIT_FLOOR);
        assert!(a.1.signs().iter().any(|&s| s < 0.0));
        let (g, _) = init_params(&net, MaskMode::None, GroupKind::DiagAffine, 8, InitOptions::default()).unwrap();
        let GroupElement::DiagAffine { scale, shift } = g else { unreachable!() };
        assert!(scale.iter().all(|&a| a == 1e-3));
        assert!(shift[net.layers()[0].bias_range()].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn flat_init_sd_applies_to_every_layer() {
        let net = Mlp::new(&[400, 300, 10]).unwrap();
        let opts = InitOptions { weight_sd: Some(0.5), ..InitOptions::default() };
        let (g, _) = init_params(&net, MaskMode::None, GroupKind::Additive, 2, opts).unwrap();
        let GroupElement::Additive(theta) = g else { unreachable!() };
        for layer in net.layers() {
            let w = &theta[layer.weight_range()];
            let sd = (w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64).sqrt();
            assert!((sd - 0.5).abs() < 0.05, "sd {sd}");
        }
        let bad = InitOptions { weight_sd: Some(0.0), ..InitOptions::default() };
        assert!(init_params(&net, MaskMode::None, GroupKind::Additive, 2, bad).is_err());
    }

    #[test]
    fn sparsity_examples() {
        let net = Mlp::new(&[2, 2]).unwrap();
        let ones = SignMask::ones(6);
        assert_eq!(sparsity_metric(&net, &[0.3, 0.3, 0.3, 0.3, 9.0, 9.0], &ones, 0).unwrap(), 0.0);
        assert_eq!(sparsity_metric(&net, &[0.0, 5.0, 0.0, 0.0, 9.0, 9.0], &ones, 0).unwrap(), 0.75);
        assert!(matches!(sparsity_metric(&net, &[0.0; 6], &ones, 1), Err(LearnError::NoSuchLayer { .. })));

        let big = Mlp::new(&[100, 100]).unwrap();
        let mut rng = noise_rng(13, 0);
        let theta: Vec<f64> = (0..big.num_params()).map(|_| rng.sample(StandardNormal)).collect();
        let w = &theta[..10_000];
        let max = w.iter().map(|v: &f64| v.abs()).fold(0.0, f64::max);
        let count = w.iter().filter(|v| v.abs() < 0.01 * max).count() as f64 / 1e4;
        let s = sparsity_metric(&big, &theta, &SignMask::ones(theta.len()), 0).unwrap();
        assert_eq!(s, count);
        // P(|Z| < 0.01 max) for max around 3.9.
        assert!((s - 0.031).abs() < 0.01, "{s}");
    }
}
