//! Run configuration files: one flat `key = value` document describing the
//! dataset source, preprocessing size, model choice, and training
//! hyperparameters. Unknown keys are errors, not warnings.
//!
//! ```text
//! dataset = synthetic            # or: directory (requires dataset_dir)
//! synth_seed = 42
//! synth_classes = circle,cross,dotgrid,vee
//! synth_per_class = 200
//! synth_clutter = 0.5
//! image_size = 32
//! model = plain                  # plain | residual | dense-connect | custom
//! epochs = 15
//! batch_size = 32
//! learning_rate = 0.05
//! momentum = 0.9
//! seed = 7
//! loss = focal                   # focal | cross-entropy
//! gamma = 2.0
//! alpha_policy = frequency       # uniform | frequency
//! eval_every = 1
//! train_fraction = 0.8
//! eval_split = val               # val | train | all
//! out_dir = runs/example
//! ```

use crate::data::{load_directory, synth_gestures, Dataset, ShapeKind};
use crate::error::{Error, Result};
use crate::model::{dense_cnn, plain_cnn, residual_cnn, ModelConfig};
use crate::train::{AlphaPolicy, LossMode, TrainConfig};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic {
        seed: u64,
        classes: Vec<ShapeKind>,
        per_class: usize,
        clutter: f64,
    },
    Directory(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelChoice {
    Plain,
    Residual,
    DenseConnect,
    Custom(PathBuf),
}

impl ModelChoice {
    pub fn parse(s: &str) -> Result<ModelChoice> {
        match s {
            "plain" => Ok(ModelChoice::Plain),
            "residual" => Ok(ModelChoice::Residual),
            "dense-connect" => Ok(ModelChoice::DenseConnect),
            "custom" => Ok(ModelChoice::Custom(PathBuf::new())),
            other => Err(Error::Config(format!(
                "unknown model \"{other}\" (expected plain, residual, dense-connect, or custom)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSplit {
    Val,
    Train,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub image_size: usize,
    pub model: ModelChoice,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    pub loss: LossMode,
    pub eval_every: usize,
    pub train_fraction: f64,
    pub eval_split: EvalSplit,
    pub out_dir: Option<PathBuf>,
}

pub const DEFAULT_SYNTH_CLASSES: &str = "circle,cross,dotgrid,vee";

fn parse_classes(value: &str) -> Result<Vec<ShapeKind>> {
    value
        .split(',')
        .map(|s| ShapeKind::parse(s.trim()))
        .collect()
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<RunConfig> {
        let mut kv: BTreeMap<&str, &str> = BTreeMap::new();
        for raw in text.lines() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key = value, got \"{line}\"")))?;
            let (key, value) = (key.trim(), value.trim());
            if kv.insert(key, value).is_some() {
                return Err(Error::Config(format!("duplicate config key \"{key}\"")));
            }
        }

        const KNOWN: &[&str] = &[
            "dataset",
            "dataset_dir",
            "synth_seed",
            "synth_classes",
            "synth_per_class",
            "synth_clutter",
            "image_size",
            "model",
            "custom_model",
            "epochs",
            "batch_size",
            "learning_rate",
            "momentum",
            "seed",
            "loss",
            "gamma",
            "alpha_policy",
            "eval_every",
            "train_fraction",
            "eval_split",
            "out_dir",
        ];
        for key in kv.keys() {
            if !KNOWN.contains(key) {
                return Err(Error::Config(format!("unknown config key \"{key}\"")));
            }
        }

        fn get_parsed<T: std::str::FromStr>(
            kv: &BTreeMap<&str, &str>,
            key: &str,
            default: T,
        ) -> Result<T> {
            match kv.get(key) {
                None => Ok(default),
                Some(v) => v
                    .parse()
                    .map_err(|_| Error::Config(format!("bad value \"{v}\" for key \"{key}\""))),
            }
        }

        let dataset = match kv.get("dataset") {
            None => return Err(Error::Config("missing required key \"dataset\"".into())),
            Some(&"synthetic") => DatasetSource::Synthetic {
                seed: get_parsed(&kv, "synth_seed", 42u64)?,
                classes: parse_classes(kv.get("synth_classes").unwrap_or(&DEFAULT_SYNTH_CLASSES))?,
                per_class: get_parsed(&kv, "synth_per_class", 200usize)?,
                clutter: get_parsed(&kv, "synth_clutter", 0.5f64)?,
            },
            Some(&"directory") => {
                let dir = kv.get("dataset_dir").ok_or_else(|| {
                    Error::Config("dataset = directory requires \"dataset_dir\"".into())
                })?;
                DatasetSource::Directory(PathBuf::from(dir))
            }
            Some(other) => {
                return Err(Error::Config(format!(
                    "dataset must be \"synthetic\" or \"directory\", got \"{other}\""
                )))
            }
        };

        let model = match kv.get("model") {
            None => ModelChoice::Plain,
            Some(&"custom") => {
                let path = kv.get("custom_model").ok_or_else(|| {
                    Error::Config("model = custom requires \"custom_model\"".into())
                })?;
                ModelChoice::Custom(PathBuf::from(path))
            }
            Some(other) => ModelChoice::parse(other)?,
        };

        let gamma = get_parsed(&kv, "gamma", 2.0f64)?;
        let alpha_policy = match kv.get("alpha_policy") {
            None => AlphaPolicy::ByFrequency,
            Some(&"uniform") => AlphaPolicy::Uniform,
            Some(&"frequency") => AlphaPolicy::ByFrequency,
            Some(other) => {
                return Err(Error::Config(format!(
                    "alpha_policy must be \"uniform\" or \"frequency\", got \"{other}\""
                )))
            }
        };
        let loss = match kv.get("loss") {
            None | Some(&"focal") => LossMode::Focal {
                gamma,
                alpha_policy,
            },
            Some(&"cross-entropy") => LossMode::CrossEntropy,
            Some(other) => {
                return Err(Error::Config(format!(
                    "loss must be \"focal\" or \"cross-entropy\", got \"{other}\""
                )))
            }
        };

        let eval_split = match kv.get("eval_split") {
            None | Some(&"val") => EvalSplit::Val,
            Some(&"train") => EvalSplit::Train,
            Some(&"all") => EvalSplit::All,
            Some(other) => {
                return Err(Error::Config(format!(
                    "eval_split must be \"val\", \"train\", or \"all\", got \"{other}\""
                )))
            }
        };

        Ok(RunConfig {
            dataset,
            image_size: get_parsed(&kv, "image_size", 32usize)?,
            model,
            epochs: get_parsed(&kv, "epochs", 15usize)?,
            batch_size: get_parsed(&kv, "batch_size", 32usize)?,
            learning_rate: get_parsed(&kv, "learning_rate", 0.05f64)?,
            momentum: get_parsed(&kv, "momentum", 0.9f64)?,
            seed: get_parsed(&kv, "seed", 7u64)?,
            loss,
            eval_every: get_parsed(&kv, "eval_every", 1usize)?,
            train_fraction: get_parsed(&kv, "train_fraction", 0.8f64)?,
            eval_split,
            out_dir: kv.get("out_dir").map(PathBuf::from),
        })
    }

    /// Reads and parses a config file, checking that referenced input paths
    /// exist.
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let config = RunConfig::from_text(&text)?;
        if let DatasetSource::Directory(dir) = &config.dataset {
            if !dir.is_dir() {
                return Err(Error::Config(format!(
                    "dataset_dir {} is not a directory",
                    dir.display()
                )));
            }
        }
        if let ModelChoice::Custom(file) = &config.model {
            if !file.is_file() {
                return Err(Error::Config(format!(
                    "custom_model {} is not a file",
                    file.display()
                )));
            }
        }
        Ok(config)
    }

    /// Materializes the configured dataset (generating or loading it).
    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.dataset {
            DatasetSource::Synthetic {
                seed,
                classes,
                per_class,
                clutter,
            } => synth_gestures(*seed, classes, *per_class, self.image_size, *clutter),
            DatasetSource::Directory(dir) => load_directory(dir, self.image_size),
        }
    }

    /// Resolves the model choice into a buildable config for the given class
    /// count.
    pub fn model_config(&self, num_classes: usize) -> Result<ModelConfig> {
        let input = [1, self.image_size, self.image_size];
        match &self.model {
            ModelChoice::Plain => plain_cnn(input, num_classes, self.seed),
            ModelChoice::Residual => residual_cnn(input, num_classes, self.seed),
            ModelChoice::DenseConnect => dense_cnn(input, num_classes, self.seed),
            ModelChoice::Custom(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("cannot read custom model {}: {e}", path.display()))
                })?;
                let config = ModelConfig::from_text(&text)?;
                if config.num_classes != num_classes {
                    return Err(Error::Config(format!(
                        "custom model declares {} classes but the dataset has {num_classes}",
                        config.num_classes
                    )));
                }
                Ok(config)
            }
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            seed: self.seed,
            loss_mode: self.loss,
            eval_every: self.eval_every,
        }
    }

    /// The output directory, or a named config error if the command needs one.
    pub fn require_out_dir(&self) -> Result<&Path> {
        self.out_dir
            .as_deref()
            .ok_or_else(|| Error::Config("missing required key \"out_dir\"".into()))
    }
}
