//! Focal loss and its cross-entropy special case.
//!
//! Per sample with true class t: FL = -alpha_t * (1 - p_t)^gamma * log(p_t),
//! where p_t is the predicted probability of the true class. gamma down-weights
//! easy examples; alpha_t re-balances classes. gamma = 0 with unit alpha is
//! exactly cross-entropy.
//!
//! The returned gradient is taken with respect to the pre-softmax logits
//! (fused through the softmax), which is the numerically stable form:
//!
//!   dL/dz_j = c * (delta_tj - p_j),
//!   c = alpha_t * (gamma * (1-p_t)^(gamma-1) * p_t * ln(p_t) - (1-p_t)^gamma)
//!
//! At gamma = 0 the coefficient c is exactly -alpha_t, reducing bit-for-bit to
//! the familiar softmax + cross-entropy gradient (p - one_hot) / batch.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Clamp bound for p_t before the log; far below anything finite logits can
/// produce.
pub const PROB_CLAMP: f64 = 1e-12;

/// Row-sum slack when validating that inputs are softmax outputs.
pub const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct FocalConfig {
    gamma: f64,
    alpha: Vec<f64>,
}

impl FocalConfig {
    pub fn new(gamma: f64, alpha: Vec<f64>) -> Result<FocalConfig> {
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::Config(format!(
                "focal gamma must be finite and >= 0, got {gamma}"
            )));
        }
        if alpha.is_empty() {
            return Err(Error::Config("focal alpha vector is empty".into()));
        }
        if let Some(bad) = alpha.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
            return Err(Error::Config(format!(
                "focal alpha entries must lie in (0, 1], got {bad}"
            )));
        }
        Ok(FocalConfig { gamma, alpha })
    }

    /// gamma = 0, unit alpha: plain cross-entropy.
    pub fn cross_entropy(num_classes: usize) -> FocalConfig {
        FocalConfig {
            gamma: 0.0,
            alpha: vec![1.0; num_classes],
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn num_classes(&self) -> usize {
        self.alpha.len()
    }
}

fn validate_probs(probs: &Tensor, targets: &[usize], num_classes: usize) -> Result<(usize, usize)> {
    if probs.rank() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "probs must be 2-D [batch, classes], got {:?}",
            probs.shape()
        )));
    }
    let (batch, classes) = (probs.dim(0), probs.dim(1));
    if classes != num_classes {
        return Err(Error::ShapeMismatch(format!(
            "probs have {classes} classes but alpha has {num_classes}"
        )));
    }
    if targets.len() != batch {
        return Err(Error::ShapeMismatch(format!(
            "{} targets for batch of {batch}",
            targets.len()
        )));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= classes) {
        return Err(Error::IndexOutOfRange(format!(
            "target class {bad} out of range for {classes} classes"
        )));
    }
    for (i, row) in probs.data().chunks_exact(classes).enumerate() {
        let mut sum = 0.0;
        for &p in row {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidDistribution(format!(
                    "probs[{i}] contains {p}, outside [0, 1]"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probs[{i}] sums to {sum}"
            )));
        }
    }
    Ok((batch, classes))
}

/// Batch-mean focal loss and its gradient with respect to the logits.
pub fn focal_loss(probs: &Tensor, targets: &[usize], cfg: &FocalConfig) -> Result<(f64, Tensor)> {
    let (batch, classes) = validate_probs(probs, targets, cfg.num_classes())?;
    let inv_n = 1.0 / batch as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; batch * classes];
    for (i, (row, &t)) in probs
        .data()
        .chunks_exact(classes)
        .zip(targets)
        .enumerate()
    {
        let alpha = cfg.alpha[t];
        let p_t = row[t].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let one_minus = 1.0 - p_t;
        let log_p = p_t.ln();
        let focal_w = one_minus.powf(cfg.gamma);
        loss += -alpha * focal_w * log_p;
        // Multiplying through by p_t avoids any division and makes the
        // gamma = 0 case reduce exactly to -alpha.
        let coeff = alpha * (cfg.gamma * one_minus.powf(cfg.gamma - 1.0) * p_t * log_p - focal_w);
        let g_row = &mut grad[i * classes..(i + 1) * classes];
        for (j, (g, &p_j)) in g_row.iter_mut().zip(row).enumerate() {
            let delta = if j == t { 1.0 } else { 0.0 };
            *g = coeff * (delta - p_j) * inv_n;
        }
    }
    loss *= inv_n;
    Ok((loss, Tensor::from_raw(vec![batch, classes], grad)))
}

/// Cross-entropy: focal loss at gamma = 0 with unit alpha, bit-for-bit.
pub fn cross_entropy(probs: &Tensor, targets: &[usize]) -> Result<(f64, Tensor)> {
    focal_loss(probs, targets, &FocalConfig::cross_entropy(probs.dim(1)))
}

/// Per-class alpha from training-set class counts: alpha_c proportional to
/// N / (C * count_c), normalized so the largest entry is 1.
pub fn alpha_from_frequencies(class_counts: &[usize]) -> Result<Vec<f64>> {
    if class_counts.len() < 2 {
        return Err(Error::DegenerateClass(format!(
            "need at least 2 classes, got {}",
            class_counts.len()
        )));
    }
    if let Some(idx) = class_counts.iter().position(|&c| c == 0) {
        return Err(Error::DegenerateClass(format!("class {idx} has no samples")));
    }
    let total: usize = class_counts.iter().sum();
    let c = class_counts.len() as f64;
    let raw: Vec<f64> = class_counts
        .iter()
        .map(|&n| total as f64 / (c * n as f64))
        .collect();
    let max = raw.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    Ok(raw.into_iter().map(|v| v / max).collect())
}
