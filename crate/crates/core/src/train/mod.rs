//! The optimization loop: SGD with momentum over focal or cross-entropy loss,
//! per-epoch evaluation, and the training history behind the metrics CSV.
//!
//! Training runs a fixed epoch budget and is fully deterministic given the
//! config seed, the model's init seed, and the dataset. A non-finite loss
//! aborts immediately with the epoch that diverged.

mod compare;
mod gradcheck;
mod metrics;

pub use compare::{compare_architectures, CompareEntry, CompareReport};
pub use gradcheck::{
    grad_check, max_relative_error, numeric_gradients, GradCheckReport, GRAD_CHECK_PARAM_GUARD,
};
pub use metrics::{
    auc_macro, auc_macro_with_exclusions, confusion, evaluate, predict_labels, recall_macro,
    MetricsReport,
};

use crate::data::{batches, Dataset};
use crate::error::{Error, Result};
use crate::loss::{alpha_from_frequencies, focal_loss, FocalConfig};
use crate::model::Model;
use crate::rng::Rng;
use crate::tensor::Tensor;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaPolicy {
    /// All classes weighted 1.
    Uniform,
    /// Alpha derived from training-set class counts.
    ByFrequency,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossMode {
    Focal { gamma: f64, alpha_policy: AlphaPolicy },
    CrossEntropy,
}

impl LossMode {
    /// Resolves the loss configuration against the training-set class counts.
    pub fn focal_config(&self, class_counts: &[usize]) -> Result<FocalConfig> {
        match self {
            LossMode::CrossEntropy => Ok(FocalConfig::cross_entropy(class_counts.len())),
            LossMode::Focal {
                gamma,
                alpha_policy,
            } => {
                let alpha = match alpha_policy {
                    AlphaPolicy::Uniform => vec![1.0; class_counts.len()],
                    AlphaPolicy::ByFrequency => alpha_from_frequencies(class_counts)?,
                };
                FocalConfig::new(*gamma, alpha)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    pub loss_mode: LossMode,
    /// Evaluate on the validation set every this many epochs.
    pub eval_every: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        // lr = 0 is allowed: training then provably leaves parameters alone,
        // which the determinism tests rely on.
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// One momentum-SGD update: v' = momentum * v - lr * g; p' = p + v'.
/// Pure: returns the new parameter and velocity tensors.
pub fn sgd_step(
    params: &[Tensor],
    grads: &[Tensor],
    velocity: &[Tensor],
    learning_rate: f64,
    momentum: f64,
) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(Error::ShapeMismatch(format!(
            "sgd_step got {} params, {} grads, {} velocity tensors",
            params.len(),
            grads.len(),
            velocity.len()
        )));
    }
    let mut new_params = Vec::with_capacity(params.len());
    let mut new_velocity = Vec::with_capacity(params.len());
    for (i, ((p, g), v)) in params.iter().zip(grads).zip(velocity).enumerate() {
        if p.shape() != g.shape() || p.shape() != v.shape() {
            return Err(Error::ShapeMismatch(format!(
                "sgd_step tensor {i}: param {:?}, grad {:?}, velocity {:?}",
                p.shape(),
                g.shape(),
                v.shape()
            )));
        }
        let mut vel = Vec::with_capacity(p.len());
        let mut par = Vec::with_capacity(p.len());
        for ((&pv, &gv), &vv) in p.data().iter().zip(g.data()).zip(v.data()) {
            let nv = momentum * vv - learning_rate * gv;
            vel.push(nv);
            par.push(pv + nv);
        }
        new_velocity.push(Tensor::from_raw(p.shape().to_vec(), vel));
        new_params.push(Tensor::from_raw(p.shape().to_vec(), par));
    }
    Ok((new_params, new_velocity))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch index.
    pub epoch: usize,
    /// Mean per-sample training loss over the epoch.
    pub train_loss: f64,
    pub val_auc: f64,
    pub val_recall: f64,
    pub val_accuracy: f64,
    /// Wall time of the epoch (train + eval) in seconds.
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    /// CSV with the fixed column set
    /// `epoch,train_loss,val_auc,val_recall,val_accuracy,seconds`.
    /// All columns except `seconds` are deterministic for a given run config.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_auc,val_recall,val_accuracy,seconds\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6},{:.3}\n",
                r.epoch, r.train_loss, r.val_auc, r.val_recall, r.val_accuracy, r.seconds
            ));
        }
        out
    }

    pub fn final_record(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

fn check_datasets(model: &Model, train_set: &Dataset, val_set: &Dataset) -> Result<()> {
    for (name, ds) in [("training", train_set), ("validation", val_set)] {
        if ds.num_classes() != model.num_classes() {
            return Err(Error::Config(format!(
                "{name} set has {} classes but the model expects {}",
                ds.num_classes(),
                model.num_classes()
            )));
        }
        let size = ds.image_size();
        if model.input_shape() != [1, size, size] {
            return Err(Error::Config(format!(
                "{name} set images are 1x{size}x{size} but the model expects {:?}",
                model.input_shape()
            )));
        }
    }
    Ok(())
}

/// Trains for exactly `cfg.epochs` epochs (no early stopping), evaluating on
/// the validation set every `cfg.eval_every` epochs. Returns the trained
/// model and the history rows recorded at evaluation epochs.
pub fn train(model: Model, train_set: &Dataset, val_set: &Dataset, cfg: &TrainConfig) -> Result<(Model, History)> {
    cfg.validate()?;
    check_datasets(&model, train_set, val_set)?;
    let focal_cfg = cfg.loss_mode.focal_config(&train_set.class_counts())?;
    let mut model = model;
    let mut params: Vec<Tensor> = model.params().into_iter().cloned().collect();
    let mut velocity: Vec<Tensor> = params
        .iter()
        .map(|p| Tensor::from_raw(p.shape().to_vec(), vec![0.0; p.len()]))
        .collect();
    let mut shuffle_rng = Rng::new(cfg.seed);
    let mut history = History::default();
    let n_train = train_set.len() as f64;
    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let mut epoch_loss = 0.0;
        // Blown-up parameters surface as non-finite activations or invalid
        // probability rows; both mean the run diverged at this epoch.
        let as_divergence = |e: Error| match e {
            Error::InvalidDistribution(_) | Error::NonFinite(_) => Error::Divergence {
                epoch,
                loss: f64::NAN,
            },
            other => other,
        };
        for batch in batches(train_set, cfg.batch_size, shuffle_rng.next_u64())? {
            let (probs, cache) = model.forward(&batch.images).map_err(as_divergence)?;
            let (loss, grad_logits) =
                focal_loss(&probs, &batch.labels, &focal_cfg).map_err(as_divergence)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            epoch_loss += loss * batch.labels.len() as f64;
            let grads = model.backward(&cache, &grad_logits)?;
            let (p, v) = sgd_step(&params, &grads, &velocity, cfg.learning_rate, cfg.momentum)?;
            params = p;
            velocity = v;
            model.set_params(&params)?;
        }
        if epoch % cfg.eval_every == 0 {
            let report = evaluate(&model, val_set, cfg.batch_size)?;
            history.records.push(EpochRecord {
                epoch,
                train_loss: epoch_loss / n_train,
                val_auc: report.macro_auc,
                val_recall: report.macro_recall,
                val_accuracy: report.accuracy,
                seconds: started.elapsed().as_secs_f64(),
            });
        }
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split, synth_gestures, ShapeKind};
    use crate::model::{plain_cnn_tiny, Model};

    fn tiny_sets(size: usize) -> (Dataset, Dataset) {
        let ds = synth_gestures(
            3,
            &[ShapeKind::Circle, ShapeKind::Cross],
            10,
            size,
            0.2,
        )
        .unwrap();
        split(&ds, 0.8, 1).unwrap()
    }

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 2,
            batch_size: 4,
            learning_rate: 0.05,
            momentum: 0.9,
            seed: 11,
            loss_mode: LossMode::Focal {
                gamma: 2.0,
                alpha_policy: AlphaPolicy::Uniform,
            },
            eval_every: 1,
        }
    }

    #[test]
    fn sgd_plain_gradient_descent_at_zero_momentum() {
        let p = [Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap()];
        let g = [Tensor::from_vec(&[2], vec![0.5, -1.0]).unwrap()];
        let v = [Tensor::zeros(&[2]).unwrap()];
        let (np, nv) = sgd_step(&p, &g, &v, 0.1, 0.0).unwrap();
        assert_eq!(np[0].data(), &[0.95, 2.1]);
        assert_eq!(nv[0].data(), &[-0.05, 0.1]);
    }

    #[test]
    fn sgd_zero_grads_zero_velocity_is_a_fixed_point() {
        let p = [Tensor::from_vec(&[2], vec![1.5, -2.5]).unwrap()];
        let g = [Tensor::zeros(&[2]).unwrap()];
        let v = [Tensor::zeros(&[2]).unwrap()];
        let (np, nv) = sgd_step(&p, &g, &v, 0.1, 0.9).unwrap();
        assert!(np[0].bits_eq(&p[0]));
        assert!(nv[0].data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sgd_two_momentum_steps_hand_iterated() {
        // momentum 0.9, lr 0.1, constant g = 1: v1 = -0.1, v2 = -0.19,
        // p moves by -0.29 total.
        let p = [Tensor::from_vec(&[1], vec![0.0]).unwrap()];
        let g = [Tensor::from_vec(&[1], vec![1.0]).unwrap()];
        let v = [Tensor::zeros(&[1]).unwrap()];
        let (p1, v1) = sgd_step(&p, &g, &v, 0.1, 0.9).unwrap();
        assert!((v1[0].data()[0] + 0.1).abs() < 1e-15);
        let (p2, v2) = sgd_step(&p1, &g, &v1, 0.1, 0.9).unwrap();
        assert!((v2[0].data()[0] + 0.19).abs() < 1e-15);
        assert!((p2[0].data()[0] + 0.29).abs() < 1e-15);
    }

    #[test]
    fn sgd_shape_mismatch_is_an_error() {
        let p = [Tensor::zeros(&[2]).unwrap()];
        let g = [Tensor::zeros(&[3]).unwrap()];
        let v = [Tensor::zeros(&[2]).unwrap()];
        assert!(matches!(
            sgd_step(&p, &g, &v, 0.1, 0.0),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn train_with_lr_zero_is_the_identity_on_parameters() {
        let (train_set, val_set) = tiny_sets(8);
        let model = Model::build(plain_cnn_tiny(2, 5)).unwrap();
        let initial: Vec<Tensor> = model.params().into_iter().cloned().collect();
        let mut cfg = tiny_cfg();
        cfg.learning_rate = 0.0;
        let (trained, _) = train(model, &train_set, &val_set, &cfg).unwrap();
        for (before, after) in initial.iter().zip(trained.params()) {
            assert!(before.bits_eq(after));
        }
    }

    #[test]
    fn train_is_deterministic() {
        let (train_set, val_set) = tiny_sets(8);
        let cfg = tiny_cfg();
        let run = || {
            let model = Model::build(plain_cnn_tiny(2, 5)).unwrap();
            train(model, &train_set, &val_set, &cfg).unwrap()
        };
        let (m1, h1) = run();
        let (m2, h2) = run();
        for (a, b) in m1.params().iter().zip(m2.params()) {
            assert!(a.bits_eq(b));
        }
        assert_eq!(h1.records.len(), h2.records.len());
        for (a, b) in h1.records.iter().zip(&h2.records) {
            assert_eq!(a.train_loss.to_bits(), b.train_loss.to_bits());
            assert_eq!(a.val_auc.to_bits(), b.val_auc.to_bits());
            assert_eq!(a.val_recall.to_bits(), b.val_recall.to_bits());
            assert_eq!(a.val_accuracy.to_bits(), b.val_accuracy.to_bits());
        }
    }

    #[test]
    fn train_class_count_mismatch_is_a_config_error() {
        let (train_set, val_set) = tiny_sets(8);
        let model = Model::build(plain_cnn_tiny(3, 5)).unwrap();
        assert!(matches!(
            train(model, &train_set, &val_set, &tiny_cfg()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn train_divergence_is_reported_with_the_epoch() {
        let (train_set, val_set) = tiny_sets(8);
        let model = Model::build(plain_cnn_tiny(2, 5)).unwrap();
        let mut cfg = tiny_cfg();
        // Large enough that activations overflow f64 on the next forward pass.
        cfg.learning_rate = 1e200;
        match train(model, &train_set, &val_set, &cfg) {
            Err(Error::Divergence { epoch, .. }) => assert_eq!(epoch, 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn eval_every_controls_history_rows() {
        let (train_set, val_set) = tiny_sets(8);
        let mut cfg = tiny_cfg();
        cfg.epochs = 4;
        cfg.eval_every = 2;
        let model = Model::build(plain_cnn_tiny(2, 5)).unwrap();
        let (_, history) = train(model, &train_set, &val_set, &cfg).unwrap();
        let epochs: Vec<usize> = history.records.iter().map(|r| r.epoch).collect();
        assert_eq!(epochs, vec![2, 4]);
    }

    #[test]
    fn history_csv_has_fixed_header_and_row_count() {
        let history = History {
            records: vec![EpochRecord {
                epoch: 1,
                train_loss: 0.5,
                val_auc: 0.9,
                val_recall: 0.8,
                val_accuracy: 0.7,
                seconds: 1.25,
            }],
        };
        let csv = history.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "epoch,train_loss,val_auc,val_recall,val_accuracy,seconds"
        );
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("1,0.500000,0.900000,0.800000,0.700000,"));
    }
}
