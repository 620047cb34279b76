//! 2-D convolution (cross-correlation, no kernel flip) with symmetric zero
//! padding, lowered to matrix products via im2col. The sliding-window loop is
//! the semantic definition; the oracle tests in `tests/conv_oracle.rs` hold
//! this implementation to it.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{matmul_abt_into, matmul_atb_into, matmul_into, Tensor};

#[derive(Debug, Clone)]
pub struct ConvParams {
    /// `[out_channels, in_channels, kernel_h, kernel_w]`
    pub weights: Tensor,
    /// `[out_channels]`
    pub bias: Tensor,
    pub stride: usize,
    pub padding: usize,
}

impl ConvParams {
    pub fn new(weights: Tensor, bias: Tensor, stride: usize, padding: usize) -> Result<ConvParams> {
        if weights.rank() != 4 {
            return Err(Error::ShapeMismatch(format!(
                "conv weights must be 4-D [out, in, kh, kw], got {:?}",
                weights.shape()
            )));
        }
        if bias.rank() != 1 || bias.dim(0) != weights.dim(0) {
            return Err(Error::ShapeMismatch(format!(
                "conv bias must be [out_channels = {}], got {:?}",
                weights.dim(0),
                bias.shape()
            )));
        }
        if stride == 0 {
            return Err(Error::InvalidShape("conv stride must be >= 1".into()));
        }
        Ok(ConvParams {
            weights,
            bias,
            stride,
            padding,
        })
    }

    /// He initialization: seeded Gaussian weights with std sqrt(2 / fan_in),
    /// zero bias. fan_in = in_channels * kernel_h * kernel_w.
    pub fn he_init(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut Rng,
    ) -> ConvParams {
        let fan_in = in_channels * kernel * kernel;
        let std = (2.0 / fan_in as f64).sqrt();
        let n = out_channels * in_channels * kernel * kernel;
        let data: Vec<f64> = (0..n).map(|_| std * rng.normal()).collect();
        ConvParams {
            weights: Tensor::from_vec(&[out_channels, in_channels, kernel, kernel], data)
                .expect("he_init produces finite values"),
            bias: Tensor::zeros(&[out_channels]).unwrap(),
            stride,
            padding,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weights.dim(0)
    }

    pub fn in_channels(&self) -> usize {
        self.weights.dim(1)
    }

    pub fn kernel_h(&self) -> usize {
        self.weights.dim(2)
    }

    pub fn kernel_w(&self) -> usize {
        self.weights.dim(3)
    }
}

/// Output spatial dims: floor((dim + 2*padding - kernel) / stride) + 1.
pub fn conv_output_dims(
    h: usize,
    w: usize,
    kernel_h: usize,
    kernel_w: usize,
    stride: usize,
    padding: usize,
) -> Result<(usize, usize)> {
    let (ph, pw) = (h + 2 * padding, w + 2 * padding);
    if ph < kernel_h || pw < kernel_w {
        return Err(Error::ShapeMismatch(format!(
            "kernel {kernel_h}x{kernel_w} larger than padded input {ph}x{pw}"
        )));
    }
    Ok(((ph - kernel_h) / stride + 1, (pw - kernel_w) / stride + 1))
}

fn check_input(x: &Tensor, p: &ConvParams) -> Result<(usize, usize, usize, usize)> {
    if x.rank() != 4 {
        return Err(Error::ShapeMismatch(format!(
            "conv input must be 4-D [batch, ch, h, w], got {:?}",
            x.shape()
        )));
    }
    if x.dim(1) != p.in_channels() {
        return Err(Error::ShapeMismatch(format!(
            "conv expects {} input channels, got {}",
            p.in_channels(),
            x.dim(1)
        )));
    }
    conv_output_dims(x.dim(2), x.dim(3), p.kernel_h(), p.kernel_w(), p.stride, p.padding)
        .map(|(oh, ow)| (x.dim(0), x.dim(1), oh, ow))
}

/// Gathers all receptive-field windows of the batch into a
/// `[in_c*kh*kw, batch*out_h*out_w]` matrix. Out-of-bounds (padding) reads are
/// zero. Column index = b * (out_h*out_w) + oh * out_w + ow.
fn im2col(x: &Tensor, p: &ConvParams, out_h: usize, out_w: usize) -> Vec<f64> {
    let (batch, in_c, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
    let (kh, kw) = (p.kernel_h(), p.kernel_w());
    let l = out_h * out_w;
    let cols_n = batch * l;
    let mut cols = vec![0.0; in_c * kh * kw * cols_n];
    let data = x.data();
    for ic in 0..in_c {
        for ki in 0..kh {
            for kj in 0..kw {
                let row = (ic * kh + ki) * kw + kj;
                let row_base = row * cols_n;
                for b in 0..batch {
                    let x_base = (b * in_c + ic) * h * w;
                    let col_base = row_base + b * l;
                    for oh in 0..out_h {
                        let ih = (oh * p.stride + ki) as isize - p.padding as isize;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let x_row = x_base + ih as usize * w;
                        let col_row = col_base + oh * out_w;
                        for ow in 0..out_w {
                            let iw = (ow * p.stride + kj) as isize - p.padding as isize;
                            if iw < 0 || iw >= w as isize {
                                continue;
                            }
                            cols[col_row + ow] = data[x_row + iw as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add of a column matrix back onto the input layout; the adjoint of
/// `im2col`.
fn col2im(
    cols: &[f64],
    p: &ConvParams,
    batch: usize,
    in_c: usize,
    h: usize,
    w: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<f64> {
    let (kh, kw) = (p.kernel_h(), p.kernel_w());
    let l = out_h * out_w;
    let cols_n = batch * l;
    let mut grad = vec![0.0; batch * in_c * h * w];
    for ic in 0..in_c {
        for ki in 0..kh {
            for kj in 0..kw {
                let row = (ic * kh + ki) * kw + kj;
                let row_base = row * cols_n;
                for b in 0..batch {
                    let g_base = (b * in_c + ic) * h * w;
                    let col_base = row_base + b * l;
                    for oh in 0..out_h {
                        let ih = (oh * p.stride + ki) as isize - p.padding as isize;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let g_row = g_base + ih as usize * w;
                        let col_row = col_base + oh * out_w;
                        for ow in 0..out_w {
                            let iw = (ow * p.stride + kj) as isize - p.padding as isize;
                            if iw < 0 || iw >= w as isize {
                                continue;
                            }
                            grad[g_row + iw as usize] += cols[col_row + ow];
                        }
                    }
                }
            }
        }
    }
    grad
}

/// `[batch, out_c, out_h, out_w] <-> [out_c, batch*out_h*out_w]` layout moves.
fn scatter_out(mat: &[f64], bias: &[f64], batch: usize, out_c: usize, l: usize) -> Vec<f64> {
    let mut y = vec![0.0; batch * out_c * l];
    for b in 0..batch {
        for oc in 0..out_c {
            let dst = (b * out_c + oc) * l;
            let src = oc * batch * l + b * l;
            let bv = bias[oc];
            for i in 0..l {
                y[dst + i] = mat[src + i] + bv;
            }
        }
    }
    y
}

fn gather_grad(grad_out: &Tensor, batch: usize, out_c: usize, l: usize) -> Vec<f64> {
    let g = grad_out.data();
    let mut mat = vec![0.0; out_c * batch * l];
    for b in 0..batch {
        for oc in 0..out_c {
            let src = (b * out_c + oc) * l;
            let dst = oc * batch * l + b * l;
            mat[dst..dst + l].copy_from_slice(&g[src..src + l]);
        }
    }
    mat
}

/// Linear part of the convolutional layer: cross-correlation plus bias.
/// Compose with `relu_forward` for the usual conv+activation block.
pub fn conv2d_forward(x: &Tensor, p: &ConvParams) -> Result<Tensor> {
    let (batch, _, out_h, out_w) = check_input(x, p)?;
    let (out_c, l) = (p.out_channels(), out_h * out_w);
    let k = p.in_channels() * p.kernel_h() * p.kernel_w();
    let cols = im2col(x, p, out_h, out_w);
    let mut mat = vec![0.0; out_c * batch * l];
    matmul_into(p.weights.data(), &cols, out_c, k, batch * l, &mut mat);
    let y = scatter_out(&mat, p.bias.data(), batch, out_c, l);
    Ok(Tensor::from_raw(vec![batch, out_c, out_h, out_w], y))
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Exact analytic gradients of `conv2d_forward` with respect to input,
/// weights, and bias.
pub fn conv2d_backward(x: &Tensor, p: &ConvParams, grad_out: &Tensor) -> Result<ConvGrads> {
    let (batch, in_c, out_h, out_w) = check_input(x, p)?;
    let (out_c, l) = (p.out_channels(), out_h * out_w);
    let expected = [batch, out_c, out_h, out_w];
    if grad_out.shape() != expected {
        return Err(Error::ShapeMismatch(format!(
            "conv grad_out must be {expected:?}, got {:?}",
            grad_out.shape()
        )));
    }
    let k = in_c * p.kernel_h() * p.kernel_w();
    let g_mat = gather_grad(grad_out, batch, out_c, l);

    let mut grad_bias = vec![0.0; out_c];
    for oc in 0..out_c {
        grad_bias[oc] = g_mat[oc * batch * l..(oc + 1) * batch * l].iter().sum();
    }

    let cols = im2col(x, p, out_h, out_w);
    let mut grad_w = vec![0.0; out_c * k];
    matmul_abt_into(&g_mat, &cols, out_c, batch * l, k, &mut grad_w);

    let mut grad_cols = vec![0.0; k * batch * l];
    matmul_atb_into(p.weights.data(), &g_mat, out_c, k, batch * l, &mut grad_cols);
    let grad_x = col2im(&grad_cols, p, batch, in_c, x.dim(2), x.dim(3), out_h, out_w);

    Ok(ConvGrads {
        input: Tensor::from_raw(x.shape().to_vec(), grad_x),
        weights: Tensor::from_raw(p.weights.shape().to_vec(), grad_w),
        bias: Tensor::from_raw(vec![out_c], grad_bias),
    })
}
