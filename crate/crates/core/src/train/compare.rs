//! Architecture comparison: trains the three zoo models (plus an optional
//! user-supplied config) under one seed and epoch budget and reports AUC and
//! Recall per model, one table row each.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{dense_cnn, plain_cnn, residual_cnn, Model, ModelConfig};
use crate::train::{evaluate, train, TrainConfig};

#[derive(Debug, Clone)]
pub struct CompareEntry {
    pub name: String,
    pub auc: f64,
    pub recall: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub entries: Vec<CompareEntry>,
    pub seed: u64,
    pub epochs: usize,
}

impl CompareReport {
    /// One row per model, AUC and Recall columns.
    pub fn render_table(&self) -> String {
        let mut out = format!(
            "seed {} / {} epochs per model\n\n{:<16} {:>8} {:>8}\n",
            self.seed, self.epochs, "Model", "AUC", "Recall"
        );
        for e in &self.entries {
            out.push_str(&format!(
                "{:<16} {:>8.4} {:>8.4}\n",
                e.name, e.auc, e.recall
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,auc,recall,accuracy\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6}\n",
                e.name, e.auc, e.recall, e.accuracy
            ));
        }
        out
    }

    pub fn entry(&self, name: &str) -> Option<&CompareEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Trains plain / residual / dense-connect (and optionally a custom config)
/// on the same split with the same budget; every model is initialized from
/// `cfg.seed`.
pub fn compare_architectures(
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
    custom: Option<ModelConfig>,
) -> Result<CompareReport> {
    let size = train_set.image_size();
    let input = [1, size, size];
    let classes = train_set.num_classes();
    let mut candidates: Vec<(String, ModelConfig)> = vec![
        ("plain".into(), plain_cnn(input, classes, cfg.seed)?),
        ("residual".into(), residual_cnn(input, classes, cfg.seed)?),
        ("dense-connect".into(), dense_cnn(input, classes, cfg.seed)?),
    ];
    if let Some(config) = custom {
        if config.num_classes != classes {
            return Err(Error::Config(format!(
                "custom model has {} classes but the dataset has {classes}",
                config.num_classes
            )));
        }
        candidates.push(("custom".into(), config));
    }
    let mut entries = Vec::with_capacity(candidates.len());
    for (name, config) in candidates {
        let model = Model::build(config)?;
        let (trained, _) = train(model, train_set, val_set, cfg)?;
        let report = evaluate(&trained, val_set, cfg.batch_size)?;
        entries.push(CompareEntry {
            name,
            auc: report.macro_auc,
            recall: report.macro_recall,
            accuracy: report.accuracy,
        });
    }
    Ok(CompareReport {
        entries,
        seed: cfg.seed,
        epochs: cfg.epochs,
    })
}
