//! Fully connected layer: z = f * W^T + b per batch row.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{matmul_abt_into, matmul_atb_into, matmul_into, Tensor};

#[derive(Debug, Clone)]
pub struct DenseParams {
    /// `[out_features, in_features]`
    pub weights: Tensor,
    /// `[out_features]`
    pub bias: Tensor,
}

impl DenseParams {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<DenseParams> {
        if weights.rank() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "dense weights must be 2-D [out, in], got {:?}",
                weights.shape()
            )));
        }
        if bias.rank() != 1 || bias.dim(0) != weights.dim(0) {
            return Err(Error::ShapeMismatch(format!(
                "dense bias must be [out_features = {}], got {:?}",
                weights.dim(0),
                bias.shape()
            )));
        }
        Ok(DenseParams { weights, bias })
    }

    /// He initialization, fan_in = in_features; zero bias.
    pub fn he_init(in_features: usize, out_features: usize, rng: &mut Rng) -> DenseParams {
        let std = (2.0 / in_features as f64).sqrt();
        let data: Vec<f64> = (0..out_features * in_features)
            .map(|_| std * rng.normal())
            .collect();
        DenseParams {
            weights: Tensor::from_vec(&[out_features, in_features], data)
                .expect("he_init produces finite values"),
            bias: Tensor::zeros(&[out_features]).unwrap(),
        }
    }

    pub fn out_features(&self) -> usize {
        self.weights.dim(0)
    }

    pub fn in_features(&self) -> usize {
        self.weights.dim(1)
    }
}

fn check_input(f: &Tensor, p: &DenseParams) -> Result<(usize, usize, usize)> {
    if f.rank() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "dense input must be 2-D [batch, in], got {:?}",
            f.shape()
        )));
    }
    if f.dim(1) != p.in_features() {
        return Err(Error::ShapeMismatch(format!(
            "dense expects {} input features, got {}",
            p.in_features(),
            f.dim(1)
        )));
    }
    Ok((f.dim(0), p.in_features(), p.out_features()))
}

pub fn dense_forward(f: &Tensor, p: &DenseParams) -> Result<Tensor> {
    let (batch, n_in, n_out) = check_input(f, p)?;
    let mut z = vec![0.0; batch * n_out];
    matmul_abt_into(f.data(), p.weights.data(), batch, n_in, n_out, &mut z);
    let bias = p.bias.data();
    for row in z.chunks_exact_mut(n_out) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
    Ok(Tensor::from_raw(vec![batch, n_out], z))
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn dense_backward(f: &Tensor, p: &DenseParams, grad_out: &Tensor) -> Result<DenseGrads> {
    let (batch, n_in, n_out) = check_input(f, p)?;
    if grad_out.shape() != [batch, n_out] {
        return Err(Error::ShapeMismatch(format!(
            "dense grad_out must be [{batch}, {n_out}], got {:?}",
            grad_out.shape()
        )));
    }
    let g = grad_out.data();

    let mut grad_f = vec![0.0; batch * n_in];
    matmul_into(g, p.weights.data(), batch, n_out, n_in, &mut grad_f);

    let mut grad_w = vec![0.0; n_out * n_in];
    matmul_atb_into(g, f.data(), batch, n_out, n_in, &mut grad_w);

    let mut grad_b = vec![0.0; n_out];
    for row in g.chunks_exact(n_out) {
        for (gb, &v) in grad_b.iter_mut().zip(row) {
            *gb += v;
        }
    }

    Ok(DenseGrads {
        input: Tensor::from_raw(vec![batch, n_in], grad_f),
        weights: Tensor::from_raw(vec![n_out, n_in], grad_w),
        bias: Tensor::from_raw(vec![n_out], grad_b),
    })
}
