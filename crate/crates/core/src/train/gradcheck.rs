//! Backpropagation verification: analytic parameter gradients against central
//! finite differences of the scalar loss, exhaustively over every parameter.

use crate::error::{Error, Result};
use crate::loss::{focal_loss, FocalConfig};
use crate::model::Model;
use crate::tensor::Tensor;

/// Exhaustive perturbation is quadratic-ish in parameter count; refuse models
/// above this size.
pub const GRAD_CHECK_PARAM_GUARD: usize = 50_000;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Name and flat element index of the worst parameter, e.g.
    /// "layer0.weights[17]".
    pub worst_param: String,
    pub pass: bool,
    pub tolerance: f64,
    pub epsilon: f64,
    pub param_count: usize,
}

impl GradCheckReport {
    pub fn render(&self) -> String {
        format!(
            "gradient check over {} parameters: max relative error {:.3e} at {} (epsilon {:.1e}, tolerance {:.1e}) -> {}",
            self.param_count,
            self.max_rel_err,
            self.worst_param,
            self.epsilon,
            self.tolerance,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

fn scalar_loss(model: &Model, images: &Tensor, targets: &[usize], cfg: &FocalConfig) -> Result<f64> {
    let (probs, _) = model.forward(images)?;
    Ok(focal_loss(&probs, targets, cfg)?.0)
}

/// Central finite differences of the loss with respect to every parameter:
/// (loss(p + eps) - loss(p - eps)) / (2 eps), one tensor per parameter.
pub fn numeric_gradients(
    model: &Model,
    images: &Tensor,
    targets: &[usize],
    cfg: &FocalConfig,
    epsilon: f64,
) -> Result<Vec<Tensor>> {
    let mut probe = model.clone();
    let n_tensors = probe.params().len();
    let mut grads = Vec::with_capacity(n_tensors);
    for t in 0..n_tensors {
        let len = probe.params()[t].len();
        let shape = probe.params()[t].shape().to_vec();
        let mut grad = Vec::with_capacity(len);
        for e in 0..len {
            let original = probe.params()[t].data()[e];
            probe.param_mut(t).data_mut()[e] = original + epsilon;
            let plus = scalar_loss(&probe, images, targets, cfg)?;
            probe.param_mut(t).data_mut()[e] = original - epsilon;
            let minus = scalar_loss(&probe, images, targets, cfg)?;
            probe.param_mut(t).data_mut()[e] = original;
            grad.push((plus - minus) / (2.0 * epsilon));
        }
        grads.push(Tensor::from_raw(shape, grad));
    }
    Ok(grads)
}

/// Largest relative error between two gradient sets, with the location of the
/// worst element. Relative error = |a - n| / max(|a|, |n|, 1e-8).
pub fn max_relative_error(
    analytic: &[Tensor],
    numeric: &[Tensor],
    names: &[String],
) -> (f64, String) {
    let mut worst = 0.0;
    let mut worst_param = String::from("none");
    for ((a, n), name) in analytic.iter().zip(numeric).zip(names) {
        for (e, (&av, &nv)) in a.data().iter().zip(n.data()).enumerate() {
            let rel = (av - nv).abs() / av.abs().max(nv.abs()).max(1e-8);
            if rel > worst {
                worst = rel;
                worst_param = format!("{name}[{e}]");
            }
        }
    }
    (worst, worst_param)
}

/// Compares the model's analytic gradients against central finite differences
/// for every parameter, on the given batch and loss.
pub fn grad_check(
    model: &Model,
    images: &Tensor,
    targets: &[usize],
    cfg: &FocalConfig,
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    if epsilon <= 0.0 {
        return Err(Error::Config(format!("epsilon must be > 0, got {epsilon}")));
    }
    let param_count = model.param_count();
    if param_count > GRAD_CHECK_PARAM_GUARD {
        return Err(Error::Config(format!(
            "model has {param_count} parameters; the exhaustive gradient check is capped at \
             {GRAD_CHECK_PARAM_GUARD} (use a tiny architecture variant)"
        )));
    }
    let (probs, cache) = model.forward(images)?;
    let (_, grad_logits) = focal_loss(&probs, targets, cfg)?;
    let analytic = model.backward(&cache, &grad_logits)?;
    let numeric = numeric_gradients(model, images, targets, cfg, epsilon)?;
    let (max_rel_err, worst_param) = max_relative_error(&analytic, &numeric, &model.param_names());
    Ok(GradCheckReport {
        max_rel_err,
        worst_param,
        pass: max_rel_err <= tolerance,
        tolerance,
        epsilon,
        param_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LayerSpec, ModelConfig};
    use crate::rng::Rng;

    fn random_batch(shape: &[usize], classes: usize, seed: u64) -> (Tensor, Vec<usize>) {
        let images = Tensor::seeded_uniform(shape, 0.0, 1.0, seed).unwrap();
        let mut rng = Rng::new(seed + 1);
        let targets = (0..shape[0]).map(|_| rng.next_below(classes)).collect();
        (images, targets)
    }

    fn linear_model(seed: u64) -> Model {
        Model::build(ModelConfig {
            input_shape: [1, 4, 4],
            num_classes: 3,
            layers: vec![
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 3 },
                LayerSpec::Softmax,
            ],
            init_seed: seed,
        })
        .unwrap()
    }

    #[test]
    fn linear_model_with_cross_entropy_is_tight() {
        let model = linear_model(20);
        let (images, targets) = random_batch(&[4, 1, 4, 4], 3, 70);
        let cfg = FocalConfig::cross_entropy(3);
        let report = grad_check(&model, &images, &targets, &cfg, 1e-5, 1e-6).unwrap();
        assert!(report.pass, "{}", report.render());
    }

    #[test]
    fn corrupted_analytic_gradient_is_caught() {
        let model = linear_model(21);
        let (images, targets) = random_batch(&[4, 1, 4, 4], 3, 71);
        let cfg = FocalConfig::cross_entropy(3);
        let (probs, cache) = model.forward(&images).unwrap();
        let (_, grad_logits) = focal_loss(&probs, &targets, &cfg).unwrap();
        let mut analytic = model.backward(&cache, &grad_logits).unwrap();
        // Flip the sign of one weight gradient.
        let v = analytic[0].data()[0];
        analytic[0].data_mut()[0] = -v;
        let numeric = numeric_gradients(&model, &images, &targets, &cfg, 1e-5).unwrap();
        let (max_rel, worst) = max_relative_error(&analytic, &numeric, &model.param_names());
        assert!(max_rel > 1e-4, "corruption went unnoticed: {max_rel} at {worst}");
        assert!(worst.starts_with("layer1.weights"), "{worst}");
    }

    #[test]
    fn parameter_guard_refuses_large_models() {
        let model = Model::build(ModelConfig {
            input_shape: [1, 64, 64],
            num_classes: 16,
            layers: vec![
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 16 },
                LayerSpec::Softmax,
            ],
            init_seed: 1,
        })
        .unwrap();
        assert!(model.param_count() > GRAD_CHECK_PARAM_GUARD);
        let (images, targets) = random_batch(&[1, 1, 64, 64], 16, 72);
        let cfg = FocalConfig::cross_entropy(16);
        let err = grad_check(&model, &images, &targets, &cfg, 1e-5, 1e-4).unwrap_err();
        assert!(err.to_string().contains("tiny"), "{err}");
    }
}
