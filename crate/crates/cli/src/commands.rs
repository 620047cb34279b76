//! Implementations behind the CLI subcommands.

use crate::ConfigArgs;
use gcnl_core::checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, FinalMetrics};
use gcnl_core::data::{
    decode_image, export_dataset, normalize, resize_bilinear, split, to_grayscale, Dataset,
};
use gcnl_core::error::{Error, Result};
use gcnl_core::loss::FocalConfig;
use gcnl_core::model::{dense_cnn_tiny, plain_cnn_tiny, residual_cnn_tiny, Model};
use gcnl_core::rng::Rng;
use gcnl_core::runconfig::{EvalSplit, ModelChoice, RunConfig};
use gcnl_core::train::{
    compare_architectures, evaluate, grad_check, predict_labels, train as train_model,
    AlphaPolicy, LossMode,
};
use gcnl_core::Tensor;
use std::path::Path;

impl ConfigArgs {
    /// Parses the config file and applies the override flags.
    fn load(&self) -> Result<RunConfig> {
        let path = self
            .config
            .as_deref()
            .ok_or_else(|| Error::Config("missing required flag --config".into()))?;
        let mut cfg = RunConfig::from_file(path)?;
        self.apply_overrides(&mut cfg)?;
        Ok(cfg)
    }

    fn apply_overrides(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(epochs) = self.epochs {
            cfg.epochs = epochs;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = Some(out.clone());
        }
        if let Some(model) = &self.model {
            cfg.model = match (ModelChoice::parse(model)?, &cfg.model) {
                // `--model custom` keeps the config file's custom_model path.
                (ModelChoice::Custom(_), ModelChoice::Custom(path)) => {
                    ModelChoice::Custom(path.clone())
                }
                (ModelChoice::Custom(_), _) => {
                    return Err(Error::Config(
                        "--model custom requires \"custom_model\" in the config file".into(),
                    ))
                }
                (choice, _) => choice,
            };
        }
        let gamma_override = self.gamma;
        if let Some(loss) = &self.loss {
            cfg.loss = match loss.as_str() {
                "cross-entropy" => LossMode::CrossEntropy,
                "focal" => {
                    let (gamma, alpha_policy) = match cfg.loss {
                        LossMode::Focal {
                            gamma,
                            alpha_policy,
                        } => (gamma, alpha_policy),
                        LossMode::CrossEntropy => (2.0, AlphaPolicy::ByFrequency),
                    };
                    LossMode::Focal {
                        gamma: gamma_override.unwrap_or(gamma),
                        alpha_policy,
                    }
                }
                other => {
                    return Err(Error::Config(format!(
                        "--loss must be \"focal\" or \"cross-entropy\", got \"{other}\""
                    )))
                }
            };
        } else if let Some(gamma) = gamma_override {
            match &mut cfg.loss {
                LossMode::Focal { gamma: g, .. } => *g = gamma,
                LossMode::CrossEntropy => {
                    return Err(Error::Config(
                        "--gamma only applies to the focal loss".into(),
                    ))
                }
            }
        }
        Ok(())
    }
}

fn dataset_splits(cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    let dataset = cfg.load_dataset()?;
    split(&dataset, cfg.train_fraction, cfg.seed)
}

pub fn synth(args: &ConfigArgs) -> Result<()> {
    let cfg = args.load()?;
    if !matches!(
        cfg.dataset,
        gcnl_core::runconfig::DatasetSource::Synthetic { .. }
    ) {
        return Err(Error::Config(
            "synth requires dataset = synthetic in the config".into(),
        ));
    }
    let out = cfg.require_out_dir()?;
    let dataset = cfg.load_dataset()?;
    export_dataset(&dataset, out)?;
    println!(
        "wrote {} samples ({} classes: {}) to {}",
        dataset.len(),
        dataset.num_classes(),
        dataset.class_names().join(", "),
        out.display()
    );
    Ok(())
}

pub fn train(args: &ConfigArgs) -> Result<()> {
    let cfg = args.load()?;
    let out = cfg.require_out_dir()?.to_path_buf();
    let (train_set, val_set) = dataset_splits(&cfg)?;
    let model = Model::build(cfg.model_config(train_set.num_classes())?)?;
    let (trained, history) = train_model(model, &train_set, &val_set, &cfg.train_config())?;
    std::fs::create_dir_all(&out)?;
    let meta = CheckpointMeta {
        class_names: train_set.class_names().to_vec(),
        seed: cfg.seed,
        epochs_completed: cfg.epochs,
        final_metrics: history.final_record().map(|r| FinalMetrics {
            val_auc: r.val_auc,
            val_recall: r.val_recall,
            val_accuracy: r.val_accuracy,
        }),
    };
    let ckpt_path = out.join("checkpoint.gcnl");
    save_checkpoint(&trained, &meta, &ckpt_path)?;
    let csv_path = out.join("metrics.csv");
    std::fs::write(&csv_path, history.to_csv())?;
    if let Some(r) = history.final_record() {
        println!(
            "epoch {}: train loss {:.6}, val auc {:.4}, val recall {:.4}, val accuracy {:.4}",
            r.epoch, r.train_loss, r.val_auc, r.val_recall, r.val_accuracy
        );
    }
    println!("checkpoint: {}", ckpt_path.display());
    println!("metrics:    {}", csv_path.display());
    Ok(())
}

fn resolve_checkpoint(cfg: &RunConfig, flag: Option<&Path>) -> Result<std::path::PathBuf> {
    match flag {
        Some(p) => Ok(p.to_path_buf()),
        None => Ok(cfg.require_out_dir()?.join("checkpoint.gcnl")),
    }
}

pub fn eval(args: &ConfigArgs, checkpoint: Option<&Path>) -> Result<()> {
    let cfg = args.load()?;
    let ckpt_path = resolve_checkpoint(&cfg, checkpoint)?;
    let (model, meta) = load_checkpoint(&ckpt_path)?;
    let subset = match cfg.eval_split {
        EvalSplit::All => cfg.load_dataset()?,
        EvalSplit::Train => dataset_splits(&cfg)?.0,
        EvalSplit::Val => dataset_splits(&cfg)?.1,
    };
    if subset.class_names() != meta.class_names.as_slice() {
        return Err(Error::Config(format!(
            "dataset classes [{}] do not match checkpoint classes [{}]",
            subset.class_names().join(", "),
            meta.class_names.join(", ")
        )));
    }
    let report = evaluate(&model, &subset, cfg.batch_size)?;
    print!("{}", report.render(&meta.class_names));
    Ok(())
}

pub fn predict(args: &ConfigArgs, checkpoint: &Path, image: &Path) -> Result<()> {
    // A config is optional here; predict only needs the checkpoint and image.
    if args.config.is_some() {
        args.load()?;
    }
    let (model, meta) = load_checkpoint(checkpoint)?;
    let [_, size, _] = model.input_shape();
    let bytes = std::fs::read(image)?;
    let decoded = decode_image(&bytes)?;
    let gray = to_grayscale(&decoded);
    let resized = resize_bilinear(&gray, size)?;
    let tensor = normalize(&resized)?;
    let plane = size * size;
    let input = Tensor::from_vec(&[1, 1, size, size], tensor.data().to_vec())?;
    debug_assert_eq!(input.len(), plane);
    let (probs, _) = model.forward(&input)?;
    let predicted = predict_labels(&probs)[0];
    println!("{}", meta.class_names[predicted]);
    for (name, p) in meta.class_names.iter().zip(probs.data()) {
        println!("{name} {p:.6}");
    }
    Ok(())
}

pub fn gradcheck(args: &ConfigArgs) -> Result<()> {
    // Works standalone; a config file only supplies seed/loss defaults.
    let (seed, mut loss_mode) = match &args.config {
        Some(_) => {
            let cfg = args.load()?;
            (cfg.seed, cfg.loss)
        }
        None => (
            7,
            LossMode::Focal {
                gamma: 2.0,
                alpha_policy: AlphaPolicy::Uniform,
            },
        ),
    };
    if args.config.is_none() {
        // Apply --loss/--gamma without a config file.
        if let Some(loss) = &args.loss {
            loss_mode = match loss.as_str() {
                "cross-entropy" => LossMode::CrossEntropy,
                "focal" => LossMode::Focal {
                    gamma: args.gamma.unwrap_or(2.0),
                    alpha_policy: AlphaPolicy::Uniform,
                },
                other => {
                    return Err(Error::Config(format!(
                        "--loss must be \"focal\" or \"cross-entropy\", got \"{other}\""
                    )))
                }
            };
        } else if let Some(gamma) = args.gamma {
            loss_mode = LossMode::Focal {
                gamma,
                alpha_policy: AlphaPolicy::Uniform,
            };
        }
    }
    let seed = args.seed.unwrap_or(seed);
    let classes = 3;
    let arch = args.model.as_deref().unwrap_or("plain");
    let config = match arch {
        "plain" => plain_cnn_tiny(classes, seed),
        "residual" => residual_cnn_tiny(classes, seed),
        "dense-connect" => dense_cnn_tiny(classes, seed),
        other => {
            return Err(Error::Config(format!(
                "gradcheck model must be plain, residual, or dense-connect, got \"{other}\""
            )))
        }
    };
    let model = Model::build(config)?;
    let images = Tensor::seeded_uniform(&[2, 1, 8, 8], 0.0, 1.0, seed ^ 0xabcd)?;
    let mut rng = Rng::new(seed ^ 0x1234);
    let targets: Vec<usize> = (0..2).map(|_| rng.next_below(classes)).collect();
    // Uniform alpha: gradcheck has no dataset to derive frequencies from.
    let focal_cfg = match loss_mode {
        LossMode::CrossEntropy => FocalConfig::cross_entropy(classes),
        LossMode::Focal { gamma, .. } => FocalConfig::new(gamma, vec![1.0; classes])?,
    };
    let report = grad_check(&model, &images, &targets, &focal_cfg, 1e-5, 1e-4)?;
    println!("{arch}: {}", report.render());
    if !report.pass {
        return Err(Error::Contract(format!(
            "gradient check failed: max relative error {:.3e} at {}",
            report.max_rel_err, report.worst_param
        )));
    }
    Ok(())
}

pub fn compare(args: &ConfigArgs) -> Result<()> {
    let cfg = args.load()?;
    let (train_set, val_set) = dataset_splits(&cfg)?;
    let custom = match &cfg.model {
        ModelChoice::Custom(_) => Some(cfg.model_config(train_set.num_classes())?),
        _ => None,
    };
    let report = compare_architectures(&train_set, &val_set, &cfg.train_config(), custom)?;
    print!("{}", report.render_table());
    if let Some(out) = &cfg.out_dir {
        std::fs::create_dir_all(out)?;
        let path = out.join("compare.csv");
        std::fs::write(&path, report.to_csv())?;
        println!("\nreport: {}", path.display());
    }
    Ok(())
}
