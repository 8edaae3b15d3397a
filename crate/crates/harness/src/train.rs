//! Training loop: minibatch, noise draws, direction estimate, momentum and
//! group step, with one metrics row per epoch.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lieopt_core::{noise_rng, GroupKind};
use lieopt_learn::estimator::{direction, step_seed, AffineConstants};
use lieopt_learn::net::{init_params, LossSpec, Mlp, NetObjective, SignMask};
use lieopt_learn::{Dataset, MCConfig, OptimizerState};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::{DataSource, RunConfig, Sampling};
use crate::error::{HarnessError, Result};
use crate::idx::load_idx;
use crate::metrics::{evaluate, Scores};
use crate::state::SavedState;
use crate::synth::synth_dataset;

const SHUFFLE_SALT: u64 = 0x5348_5546_464c_45;
const EVAL_SALT: u64 = 0x4556_414c;
const TEST_SALT: u64 = 0x5445_5354;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_acc: f64,
    pub test_nll: f64,
    pub test_ece: f64,
    pub wall_s: f64,
    pub lr: f64,
}

impl MetricsRow {
    pub const HEADER: &'static str = "epoch,train_loss,test_acc,test_nll,test_ece,wall_s,lr";

    pub fn csv(&self) -> String {
        format!(
            "{},{:.6},{:.4},{:.6},{:.6},{:.3},{:.6e}",
            self.epoch, self.train_loss, self.test_acc, self.test_nll, self.test_ece, self.wall_s, self.lr
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub rows: Vec<MetricsRow>,
    pub state: OptimizerState,
    pub mask: SignMask,
    pub net: Mlp,
}

impl TrainOutput {
    pub fn saved(&self) -> SavedState {
        SavedState { g: self.state.g.clone(), mask: self.mask.clone(), layers: self.net.sizes().to_vec() }
    }
}

/// Training and test sets named by the config.
pub fn load_data(cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    let (mut train, test) = match &cfg.data {
        DataSource::Idx { train_images, train_labels, test_images, test_labels } => {
            (load_idx(train_images, train_labels)?, load_idx(test_images, test_labels)?)
        }
        DataSource::Synth { kind, train, test } => {
            (synth_dataset(*kind, *train, cfg.seed)?, synth_dataset(*kind, *test, cfg.seed ^ TEST_SALT)?)
        }
    };
    if let Some(limit) = cfg.train_limit {
        if limit < train.len() {
            train.inputs.truncate(limit * train.dim);
            train.labels.truncate(limit);
        }
    }
    Ok((train, test))
}

fn subset(data: &Dataset, limit: Option<usize>) -> Dataset {
    match limit {
        Some(k) if k < data.len() => Dataset::new(data.inputs[..k * data.dim].to_vec(), data.labels[..k].to_vec(), data.dim, data.classes),
        _ => data.clone(),
    }
}

fn dump_state(cfg: &RunConfig, net: &Mlp, state: &OptimizerState, mask: &SignMask) -> String {
    let dir = cfg.out.clone().unwrap_or_else(std::env::temp_dir);
    let path = dir.join("nonfinite_dump.state");
    let saved = SavedState { g: state.g.clone(), mask: mask.clone(), layers: net.sizes().to_vec() };
    match std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e)).and_then(|_| saved.save(&path)) {
        Ok(()) => path.display().to_string(),
        Err(e) => format!("<dump failed: {e}>"),
    }
}

/// Trains on `train`, scoring `test` after every epoch. `on_epoch` sees each
/// row as soon as it is complete.
pub fn train(
    cfg: &RunConfig,
    train: &Dataset,
    test: &Dataset,
    on_epoch: &mut dyn FnMut(&MetricsRow) -> Result<()>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    let net = Mlp::new(&cfg.layers)?;
    if train.dim != net.input_dim() || test.dim != net.input_dim() {
        return Err(HarnessError::Invalid(format!(
            "network expects {} inputs, data has {} (train) and {} (test)",
            net.input_dim(),
            train.dim,
            test.dim
        )));
    }
    if train.classes > net.classes() {
        return Err(HarnessError::Invalid(format!("{} classes but {} outputs", train.classes, net.classes())));
    }
    let n_train = train.len();
    if n_train == 0 {
        return Err(HarnessError::Empty("training set"));
    }
    if cfg.batch > n_train {
        return Err(HarnessError::Invalid(format!("batch size {} exceeds dataset size {n_train}", cfg.batch)));
    }
    let steps_per_epoch = n_train.div_ceil(cfg.batch);
    let total = steps_per_epoch * cfg.epochs;
    let (g0, mask) = init_params(&net, cfg.mask, cfg.group, cfg.seed, cfg.init)?;
    let mut state = OptimizerState::new(g0, cfg.hyper(steps_per_epoch), total)?;
    let constants = match cfg.group {
        GroupKind::DiagAffine => AffineConstants::for_base(&cfg.base, cfg.affine_fallback)?,
        _ => cfg.affine_fallback,
    };
    let spec = LossSpec { reg: cfg.reg, dataset_size: n_train };
    let objective = NetObjective { net: &net, mask: &mask, spec, data: train };
    let eval_set = subset(test, cfg.eval_limit);

    let started = Instant::now();
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut rows = Vec::with_capacity(cfg.epochs);
    let mut lr = 0.0;
    for epoch in 1..=cfg.epochs {
        let mut rng = noise_rng(cfg.seed ^ SHUFFLE_SALT, epoch as u64);
        let batches: Vec<Vec<usize>> = match cfg.sampling {
            Sampling::Shuffle => {
                order.shuffle(&mut rng);
                order.chunks(cfg.batch).map(|c| c.to_vec()).collect()
            }
            Sampling::Replacement => (0..steps_per_epoch)
                .map(|_| (0..cfg.batch).map(|_| rng.random_range(0..n_train)).collect())
                .collect(),
        };
        let mut loss_sum = 0.0;
        for batch in &batches {
            let mc = MCConfig {
                samples: cfg.samples,
                seed: step_seed(cfg.seed, state.step as u64),
                temperature: cfg.temperature,
                exec: cfg.exec,
            };
            let est = direction(&objective, &cfg.base, &state.g, &mc, batch, constants)?;
            if !est.loss.is_finite() || !est.direction.is_finite() {
                let dump = dump_state(cfg, &net, &state, &mask);
                return Err(HarnessError::NonFinite { epoch, step: state.step, dump });
            }
            loss_sum += est.loss;
            lr = state.step_with(&est.direction)?;
        }
        if let Some(min) = state.g.min_scale() {
            if !(min > 0.0) {
                return Err(HarnessError::Positivity { epoch, min });
            }
        }
        let Scores { accuracy, nll, ece } = evaluate(
            &state.g,
            &cfg.base,
            &net,
            &mask,
            if epoch == cfg.epochs { test } else { &eval_set },
            cfg.eval_samples,
            step_seed(cfg.seed ^ EVAL_SALT, epoch as u64),
            cfg.exec,
        )?;
        let row = MetricsRow {
            epoch,
            train_loss: loss_sum / batches.len() as f64,
            test_acc: accuracy,
            test_nll: nll,
            test_ece: ece,
            wall_s: if cfg.wall_clock { started.elapsed().as_secs_f64() } else { 0.0 },
            lr,
        };
        on_epoch(&row)?;
        rows.push(row);
    }
    Ok(TrainOutput { rows, state, mask, net })
}

/// Paths written by [`run`] inside the output directory.
pub fn output_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join("metrics.csv"), dir.join("state.bin"))
}

/// Loads data, trains, and writes `metrics.csv` and `state.bin` (plus its
/// sidecar) when an output directory is configured.
pub fn run(cfg: &RunConfig, echo: bool) -> Result<TrainOutput> {
    let (train_set, test_set) = load_data(cfg)?;
    let mut csv = match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
            let path = output_paths(dir).0;
            let mut f = std::fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
            writeln!(f, "{}", MetricsRow::HEADER).map_err(|e| HarnessError::io(&path, e))?;
            Some((f, path))
        }
        None => None,
    };
    if echo {
        println!("{}", MetricsRow::HEADER);
    }
    let mut on_epoch = |row: &MetricsRow| -> Result<()> {
        if let Some((f, path)) = csv.as_mut() {
            writeln!(f, "{}", row.csv()).map_err(|e| HarnessError::io(path.as_path(), e))?;
        }
        if echo {
            println!("{}", row.csv());
        }
        Ok(())
    };
    let out = train(cfg, &train_set, &test_set, &mut on_epoch)?;
    if let Some(dir) = &cfg.out {
        out.saved().save(&output_paths(dir).1)?;
    }
    Ok(out)
}
