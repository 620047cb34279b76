//! ReLU and the softmax output head.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn relu_forward(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::from_raw(x.shape().to_vec(), data)
}

/// Gradient of ReLU: grad_out where x > 0, else 0. The subgradient at exactly
/// 0 is fixed to 0.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if x.shape() != grad_out.shape() {
        return Err(Error::ShapeMismatch(format!(
            "relu grad_out must be {:?}, got {:?}",
            x.shape(),
            grad_out.shape()
        )));
    }
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&xv, &gv)| if xv > 0.0 { gv } else { 0.0 })
        .collect();
    Ok(Tensor::from_raw(x.shape().to_vec(), data))
}

/// Row-wise softmax with max-shift for stability. Input is `[batch, C]`,
/// C >= 2; each output row sums to 1.
pub fn softmax(z: &Tensor) -> Result<Tensor> {
    if z.rank() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "softmax input must be 2-D [batch, classes], got {:?}",
            z.shape()
        )));
    }
    let classes = z.dim(1);
    if classes < 2 {
        return Err(Error::InvalidShape(format!(
            "softmax needs at least 2 classes, got {classes}"
        )));
    }
    let mut out = Vec::with_capacity(z.len());
    for row in z.data().chunks_exact(classes) {
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        let start = out.len();
        for &v in row {
            let e = (v - max).exp();
            sum += e;
            out.push(e);
        }
        let inv = 1.0 / sum;
        for v in &mut out[start..] {
            *v *= inv;
        }
    }
    Ok(Tensor::from_raw(z.shape().to_vec(), out))
}
