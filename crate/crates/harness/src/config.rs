//! Run configuration read from flat `key = value` files; `#` starts a comment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lieopt_core::{BaseDistribution, Execution, GroupKind};
use lieopt_learn::estimator::AffineConstants;
use lieopt_learn::net::{InitOptions, MaskMode};
use lieopt_learn::{Hyper, Schedule};

use crate::error::{HarnessError, Result};
use crate::synth::SynthKind;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
    Synth { kind: SynthKind, train: usize, test: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Each epoch visits every example once in shuffled order.
    #[default]
    Shuffle,
    /// Minibatches drawn independently with replacement.
    Replacement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub group: GroupKind,
    pub base: BaseDistribution,
    pub layers: Vec<usize>,
    pub mask: MaskMode,
    pub init: InitOptions,
    pub lr: f64,
    pub cosine: bool,
    pub warmup_epochs: usize,
    pub beta: f64,
    pub beta2: f64,
    pub temperature: f64,
    pub samples: usize,
    /// Coefficient `c` of the regularizer `c |theta|^2`.
    pub reg: f64,
    /// Used when the base distribution has no finite affine constants.
    pub affine_fallback: AffineConstants,
    pub data: DataSource,
    /// Use only the first `train_limit` training examples.
    pub train_limit: Option<usize>,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub eval_samples: usize,
    /// Examples of the test set scored after intermediate epochs (all when
    /// unset). The final epoch always scores the whole test set.
    pub eval_limit: Option<usize>,
    pub sampling: Sampling,
    pub exec: Execution,
    /// Record elapsed seconds in the metrics; off keeps the CSV reproducible.
    pub wall_clock: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let hyper = Hyper::defaults(GroupKind::Additive);
        RunConfig {
            group: GroupKind::Additive,
            base: BaseDistribution::Gaussian { sigma: 0.03 },
            layers: vec![784, 100, 10],
            mask: MaskMode::None,
            init: InitOptions::default(),
            lr: hyper.lr,
            cosine: false,
            warmup_epochs: 0,
            beta: hyper.beta,
            beta2: hyper.beta2,
            temperature: 0.0,
            samples: 1,
            reg: 0.0,
            affine_fallback: AffineConstants { c_x: 1.0, c_y: 1.0 },
            data: DataSource::Synth { kind: SynthKind::TwoMoons, train: 1000, test: 1000 },
            train_limit: None,
            batch: 50,
            epochs: 10,
            seed: 0,
            out: None,
            eval_samples: 32,
            eval_limit: None,
            sampling: Sampling::Shuffle,
            exec: Execution::default(),
            wall_clock: false,
        }
    }
}

fn parse<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| HarnessError::Config { line, message: format!("{key}: {e}") })
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(HarnessError::Config { line, message: format!("{key}: expected true or false, got '{value}'") }),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let base_dir = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base_dir)
    }

    /// Parses config text; relative paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(HarnessError::Config { line, message: format!("expected 'key = value', got '{content}'") });
            };
            let key = k.trim().to_string();
            if entries.insert(key.clone(), (line, v.trim().to_string())).is_some() {
                return Err(HarnessError::Config { line, message: format!("duplicate key '{key}'") });
            }
        }

        let mut cfg = RunConfig::default();
        if let Some((line, v)) = entries.get("group") {
            cfg.group = parse(*line, "group", v)?;
            let h = Hyper::defaults(cfg.group);
            cfg.lr = h.lr;
            cfg.beta = h.beta;
            cfg.beta2 = h.beta2;
        }
        let resolve = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };
        let mut idx: BTreeMap<&str, PathBuf> = BTreeMap::new();
        let mut synth_kind = None;
        let (mut synth_n, mut synth_test) = (1000usize, 1000usize);
        for (key, (line, v)) in &entries {
            let line = *line;
            let v = v.as_str();
            match key.as_str() {
                "group" => {}
                "base" => cfg.base = parse(line, key, v)?,
                "layers" => {
                    cfg.layers = v
                        .split(',')
                        .map(|s| parse::<usize>(line, key, s.trim()))
                        .collect::<Result<Vec<_>>>()?;
                }
                "mask" => cfg.mask = parse(line, key, v)?,
                "per_node_output" => cfg.init.per_node_output = parse_bool(line, key, v)?,
                "affine_scale" => cfg.init.affine_scale = parse(line, key, v)?,
                "init_sd" => cfg.init.weight_sd = Some(parse(line, key, v)?),
                "lr" => cfg.lr = parse(line, key, v)?,
                "schedule" => {
                    cfg.cosine = match v {
                        "cosine" => true,
                        "constant" => false,
                        _ => {
                            return Err(HarnessError::Config {
                                line,
                                message: format!("schedule: expected cosine or constant, got '{v}'"),
                            })
                        }
                    }
                }
                "warmup_epochs" => cfg.warmup_epochs = parse(line, key, v)?,
                "beta" | "beta1" => cfg.beta = parse(line, key, v)?,
                "beta2" => cfg.beta2 = parse(line, key, v)?,
                "temperature" | "tau" => cfg.temperature = parse(line, key, v)?,
                "samples" => cfg.samples = parse(line, key, v)?,
                "reg" => cfg.reg = parse(line, key, v)?,
                "affine_cx" => cfg.affine_fallback.c_x = parse(line, key, v)?,
                "affine_cy" => cfg.affine_fallback.c_y = parse(line, key, v)?,
                "train_images" | "train_labels" | "test_images" | "test_labels" => {
                    idx.insert(key.as_str(), resolve(v));
                }
                "synth" => synth_kind = Some(parse::<SynthKind>(line, key, v)?),
                "synth_n" => synth_n = parse(line, key, v)?,
                "synth_test_n" => synth_test = parse(line, key, v)?,
                "train_limit" => cfg.train_limit = Some(parse(line, key, v)?),
                "batch" => cfg.batch = parse(line, key, v)?,
                "epochs" => cfg.epochs = parse(line, key, v)?,
                "seed" => cfg.seed = parse(line, key, v)?,
                "out" => cfg.out = Some(resolve(v)),
                "eval_samples" => cfg.eval_samples = parse(line, key, v)?,
                "eval_limit" => cfg.eval_limit = Some(parse(line, key, v)?),
                "sampling" => {
                    cfg.sampling = match v {
                        "shuffle" => Sampling::Shuffle,
                        "replacement" => Sampling::Replacement,
                        _ => {
                            return Err(HarnessError::Config {
                                line,
                                message: format!("sampling: expected shuffle or replacement, got '{v}'"),
                            })
                        }
                    }
                }
                "exec" => {
                    cfg.exec = match v {
                        "parallel" => Execution::Parallel,
                        "sequential" => Execution::Sequential,
                        _ => {
                            return Err(HarnessError::Config {
                                line,
                                message: format!("exec: expected parallel or sequential, got '{v}'"),
                            })
                        }
                    }
                }
                "wall_clock" => cfg.wall_clock = parse_bool(line, key, v)?,
                _ => return Err(HarnessError::Config { line, message: format!("unknown key '{key}'") }),
            }
        }
        cfg.data = match (synth_kind, idx.len()) {
            (Some(kind), 0) => DataSource::Synth { kind, train: synth_n, test: synth_test },
            (None, 4) => DataSource::Idx {
                train_images: idx["train_images"].clone(),
                train_labels: idx["train_labels"].clone(),
                test_images: idx["test_images"].clone(),
                test_labels: idx["test_labels"].clone(),
            },
            (None, 0) => cfg.data,
            (Some(_), _) => return Err(HarnessError::Invalid("give either synth or IDX paths, not both".into())),
            (None, _) => {
                return Err(HarnessError::Invalid(
                    "IDX data needs train_images, train_labels, test_images and test_labels".into(),
                ))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that does not depend on the loaded data.
    pub fn validate(&self) -> Result<()> {
        self.hyper(1).validate()?;
        self.base.validate()?;
        lieopt_core::differential::check_compatible(&self.base, self.group)?;
        if self.layers.len() < 2 || self.layers.contains(&0) {
            return Err(HarnessError::Invalid(format!("layers must list at least two positive sizes, got {:?}", self.layers)));
        }
        if self.mask != MaskMode::None && self.group != GroupKind::Multiplicative {
            return Err(HarnessError::Invalid("sign masks apply only to the multiplicative group".into()));
        }
        if self.batch == 0 || self.epochs == 0 {
            return Err(HarnessError::Invalid("batch and epochs must be positive".into()));
        }
        if self.eval_samples == 0 {
            return Err(HarnessError::Invalid("eval_samples must be at least 1".into()));
        }
        if !(self.reg >= 0.0 && self.reg.is_finite()) {
            return Err(HarnessError::Invalid(format!("reg must be finite and >= 0, got {}", self.reg)));
        }
        if let DataSource::Idx { train_images, train_labels, test_images, test_labels } = &self.data {
            for p in [train_images, train_labels, test_images, test_labels] {
                if !p.is_file() {
                    return Err(HarnessError::Invalid(format!("data file {} does not exist", p.display())));
                }
            }
        }
        if let DataSource::Synth { train, test, .. } = self.data {
            if train < 2 || test < 2 {
                return Err(HarnessError::Invalid("synthetic datasets need at least 2 examples".into()));
            }
        }
        Ok(())
    }

    pub fn hyper(&self, steps_per_epoch: usize) -> Hyper {
        Hyper {
            lr: self.lr,
            schedule: if self.cosine {
                Schedule::Cosine { warmup_steps: self.warmup_epochs * steps_per_epoch }
            } else {
                Schedule::Constant
            },
            beta: self.beta,
            beta2: self.beta2,
            temperature: self.temperature,
            samples: self.samples,
        }
    }
}
