//! Plain-text `key=value` experiment configuration.
//!
//! Keys carry a section prefix (`train.epochs=10`, `tune.prompt_lr=0.1`).
//! Lines starting with `#` are comments. Unknown keys are rejected so typos
//! surface as config errors rather than silently-used defaults.

use std::path::{Path, PathBuf};

use crate::backbone::TrainConfig;
use crate::error::{Error, Result};
use crate::prompt::{default_frame_width, TuneConfig};
use crate::rng::{derive_seed, domain};
use crate::unlearn::EraserConfig;

/// Where the experiment's images come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    /// Template-plus-noise images generated on the fly.
    Synthetic {
        classes: usize,
        per_class: usize,
        test_per_class: usize,
        shape: (usize, usize, usize),
        noise_sigma: f64,
    },
    /// One IDX pair, split into public/private by `public_fraction`.
    Idx {
        images: PathBuf,
        labels: PathBuf,
        test_images: Option<PathBuf>,
        test_labels: Option<PathBuf>,
    },
    /// Separate IDX pairs per provenance: the files decide the partition.
    IdxSplit {
        public_images: PathBuf,
        public_labels: PathBuf,
        private_images: PathBuf,
        private_labels: PathBuf,
        test_images: Option<PathBuf>,
        test_labels: Option<PathBuf>,
    },
}

/// Full experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub dataset: DatasetSpec,
    pub public_fraction: f64,
    pub train: TrainConfig,
    pub tune: TuneConfig,
    pub threshold: f64,
    pub sample_size: usize,
    pub global_seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for Config {
    /// Desk-scale defaults: a 28x28 grayscale synthetic task with one
    /// 128-wide hidden layer and 64-dimensional features.
    fn default() -> Self {
        let shape = (28, 28, 1);
        let global_seed = 42;
        Config {
            dataset: DatasetSpec::Synthetic {
                classes: 10,
                per_class: 120,
                test_per_class: 20,
                shape,
                noise_sigma: 0.08,
            },
            public_fraction: 0.5,
            train: TrainConfig {
                learning_rate: 0.1,
                epochs: 10,
                batch_size: 32,
                seed: derive_seed(global_seed, domain::PRETRAIN_SEED, 0),
                hidden_dims: vec![128],
                feature_dim: 64,
            },
            tune: TuneConfig {
                prompt_lr: 0.1,
                head_lr: 0.1,
                epochs: 10,
                batch_size: 32,
                frame_width: default_frame_width(shape.0),
            },
            threshold: 8.0,
            sample_size: 1000,
            global_seed,
            out_dir: None,
        }
    }
}

fn cfg_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config { field: field.to_string(), message: message.into() }
}

fn parse_num<T: std::str::FromStr>(field: &str, value: &str) -> Result<T> {
    value.trim().parse::<T>().map_err(|_| cfg_err(field, format!("cannot parse `{value}`")))
}

fn parse_shape(field: &str, value: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<&str> = value.trim().split('x').collect();
    if parts.len() != 3 {
        return Err(cfg_err(field, format!("expected HxWxC, got `{value}`")));
    }
    Ok((
        parse_num(field, parts[0])?,
        parse_num(field, parts[1])?,
        parse_num(field, parts[2])?,
    ))
}

fn parse_list(field: &str, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|p| parse_num::<usize>(field, p))
        .collect()
}

#[derive(Default)]
struct RawDataset {
    kind: Option<String>,
    classes: Option<usize>,
    per_class: Option<usize>,
    test_per_class: Option<usize>,
    shape: Option<(usize, usize, usize)>,
    noise_sigma: Option<f64>,
    images: Option<PathBuf>,
    labels: Option<PathBuf>,
    test_images: Option<PathBuf>,
    test_labels: Option<PathBuf>,
    public_images: Option<PathBuf>,
    public_labels: Option<PathBuf>,
    private_images: Option<PathBuf>,
    private_labels: Option<PathBuf>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        Config::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        let mut raw = RawDataset::default();
        let mut train_seed_set = false;
        let mut frame_width_set = false;

        for (line_no, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                cfg_err(&format!("line {}", line_no + 1), format!("`{line}` is not key=value"))
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "seed" => cfg.global_seed = parse_num(key, value)?,
                "out" => cfg.out_dir = Some(PathBuf::from(value)),
                "dataset.kind" => raw.kind = Some(value.to_string()),
                "dataset.classes" => raw.classes = Some(parse_num(key, value)?),
                "dataset.per_class" => raw.per_class = Some(parse_num(key, value)?),
                "dataset.test_per_class" => raw.test_per_class = Some(parse_num(key, value)?),
                "dataset.shape" => raw.shape = Some(parse_shape(key, value)?),
                "dataset.noise_sigma" => raw.noise_sigma = Some(parse_num(key, value)?),
                "dataset.images" => raw.images = Some(PathBuf::from(value)),
                "dataset.labels" => raw.labels = Some(PathBuf::from(value)),
                "dataset.test_images" => raw.test_images = Some(PathBuf::from(value)),
                "dataset.test_labels" => raw.test_labels = Some(PathBuf::from(value)),
                "dataset.public_images" => raw.public_images = Some(PathBuf::from(value)),
                "dataset.public_labels" => raw.public_labels = Some(PathBuf::from(value)),
                "dataset.private_images" => raw.private_images = Some(PathBuf::from(value)),
                "dataset.private_labels" => raw.private_labels = Some(PathBuf::from(value)),
                "partition.public_fraction" => cfg.public_fraction = parse_num(key, value)?,
                "train.learning_rate" => cfg.train.learning_rate = parse_num(key, value)?,
                "train.epochs" => cfg.train.epochs = parse_num(key, value)?,
                "train.batch_size" => cfg.train.batch_size = parse_num(key, value)?,
                "train.hidden_dims" => cfg.train.hidden_dims = parse_list(key, value)?,
                "train.feature_dim" => cfg.train.feature_dim = parse_num(key, value)?,
                "train.seed" => {
                    cfg.train.seed = parse_num(key, value)?;
                    train_seed_set = true;
                }
                "cluster.sample_size" => cfg.sample_size = parse_num(key, value)?,
                "cluster.threshold" => cfg.threshold = parse_num(key, value)?,
                "tune.prompt_lr" => cfg.tune.prompt_lr = parse_num(key, value)?,
                "tune.head_lr" => cfg.tune.head_lr = parse_num(key, value)?,
                "tune.epochs" => cfg.tune.epochs = parse_num(key, value)?,
                "tune.batch_size" => cfg.tune.batch_size = parse_num(key, value)?,
                "tune.frame_width" => {
                    cfg.tune.frame_width = parse_num(key, value)?;
                    frame_width_set = true;
                }
                other => return Err(cfg_err(other, "unknown key")),
            }
        }

        cfg.dataset = resolve_dataset(raw)?;
        if !train_seed_set {
            cfg.train.seed = derive_seed(cfg.global_seed, domain::PRETRAIN_SEED, 0);
        }
        if !frame_width_set {
            if let DatasetSpec::Synthetic { shape, .. } = &cfg.dataset {
                cfg.tune.frame_width = default_frame_width(shape.0);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.public_fraction > 0.0 && self.public_fraction < 1.0) {
            return Err(cfg_err(
                "partition.public_fraction",
                format!("must be in (0, 1), got {}", self.public_fraction),
            ));
        }
        self.train
            .validate()
            .map_err(|e| cfg_err("train", e.to_string()))?;
        self.tune
            .validate()
            .map_err(|e| cfg_err("tune", e.to_string()))?;
        if !(self.threshold > 0.0) {
            return Err(cfg_err("cluster.threshold", "must be positive"));
        }
        if self.sample_size == 0 {
            return Err(cfg_err("cluster.sample_size", "must be at least 1"));
        }
        if let DatasetSpec::Synthetic { classes, per_class, noise_sigma, shape, .. } = &self.dataset
        {
            if *classes < 2 {
                return Err(cfg_err("dataset.classes", "need at least 2"));
            }
            if *per_class == 0 {
                return Err(cfg_err("dataset.per_class", "must be at least 1"));
            }
            if *noise_sigma < 0.0 {
                return Err(cfg_err("dataset.noise_sigma", "must be non-negative"));
            }
            if 2 * self.tune.frame_width > shape.0.min(shape.1) {
                return Err(cfg_err("tune.frame_width", "larger than the image allows"));
            }
        }
        Ok(())
    }

    /// The part of the configuration that lives inside trained states.
    pub fn eraser_config(&self) -> EraserConfig {
        EraserConfig {
            train: self.train.clone(),
            tune: self.tune.clone(),
            threshold: self.threshold,
            sample_size: self.sample_size,
        }
    }
}

fn resolve_dataset(raw: RawDataset) -> Result<DatasetSpec> {
    let default = Config::default();
    let default_synth = match default.dataset {
        DatasetSpec::Synthetic { classes, per_class, test_per_class, shape, noise_sigma } => {
            (classes, per_class, test_per_class, shape, noise_sigma)
        }
        _ => unreachable!(),
    };
    match raw.kind.as_deref().unwrap_or("synthetic") {
        "synthetic" => Ok(DatasetSpec::Synthetic {
            classes: raw.classes.unwrap_or(default_synth.0),
            per_class: raw.per_class.unwrap_or(default_synth.1),
            test_per_class: raw.test_per_class.unwrap_or(default_synth.2),
            shape: raw.shape.unwrap_or(default_synth.3),
            noise_sigma: raw.noise_sigma.unwrap_or(default_synth.4),
        }),
        "idx" => Ok(DatasetSpec::Idx {
            images: raw.images.ok_or_else(|| cfg_err("dataset.images", "required for idx"))?,
            labels: raw.labels.ok_or_else(|| cfg_err("dataset.labels", "required for idx"))?,
            test_images: raw.test_images,
            test_labels: raw.test_labels,
        }),
        "idx-split" => Ok(DatasetSpec::IdxSplit {
            public_images: raw
                .public_images
                .ok_or_else(|| cfg_err("dataset.public_images", "required for idx-split"))?,
            public_labels: raw
                .public_labels
                .ok_or_else(|| cfg_err("dataset.public_labels", "required for idx-split"))?,
            private_images: raw
                .private_images
                .ok_or_else(|| cfg_err("dataset.private_images", "required for idx-split"))?,
            private_labels: raw
                .private_labels
                .ok_or_else(|| cfg_err("dataset.private_labels", "required for idx-split"))?,
            test_images: raw.test_images,
            test_labels: raw.test_labels,
        }),
        other => Err(cfg_err("dataset.kind", format!("unknown kind `{other}`"))),
    }
}
