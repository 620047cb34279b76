//! Max and average pooling. No padding; output dims follow the same floor
//! formula as convolution. Max pooling records argmax positions so the
//! backward pass can route each upstream gradient to exactly one input cell
//! (ties broken by first row-major window position).

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolSpec {
    pub kind: PoolKind,
    pub window: usize,
    pub stride: usize,
}

impl PoolSpec {
    pub fn new(kind: PoolKind, window: usize, stride: usize) -> Result<PoolSpec> {
        if window == 0 || stride == 0 {
            return Err(Error::InvalidShape(
                "pool window and stride must be >= 1".into(),
            ));
        }
        Ok(PoolSpec {
            kind,
            window,
            stride,
        })
    }
}

impl Default for PoolSpec {
    /// Max pool, window 2, stride 2.
    fn default() -> Self {
        PoolSpec {
            kind: PoolKind::Max,
            window: 2,
            stride: 2,
        }
    }
}

/// Bookkeeping from a forward pass, consumed by `pool_backward`.
#[derive(Debug, Clone)]
pub struct PoolRecord {
    spec: PoolSpec,
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    /// For max pooling: flat input index chosen per output element, in output
    /// iteration order.
    argmax: Option<Vec<usize>>,
}

pub fn pool_forward(x: &Tensor, spec: &PoolSpec) -> Result<(Tensor, PoolRecord)> {
    if x.rank() != 4 {
        return Err(Error::ShapeMismatch(format!(
            "pool input must be 4-D [batch, ch, h, w], got {:?}",
            x.shape()
        )));
    }
    let (batch, ch, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
    if spec.window > h || spec.window > w {
        return Err(Error::ShapeMismatch(format!(
            "pool window {} larger than input {h}x{w}",
            spec.window
        )));
    }
    let out_h = (h - spec.window) / spec.stride + 1;
    let out_w = (w - spec.window) / spec.stride + 1;
    let mut out = vec![0.0; batch * ch * out_h * out_w];
    let mut argmax = match spec.kind {
        PoolKind::Max => Some(vec![0usize; out.len()]),
        PoolKind::Average => None,
    };
    let data = x.data();
    let inv_area = 1.0 / (spec.window * spec.window) as f64;
    let mut oi = 0;
    for b in 0..batch {
        for c in 0..ch {
            let base = (b * ch + c) * h * w;
            for oh in 0..out_h {
                for ow in 0..out_w {
                    let (ih0, iw0) = (oh * spec.stride, ow * spec.stride);
                    match spec.kind {
                        PoolKind::Max => {
                            let mut best = f64::NEG_INFINITY;
                            let mut best_idx = 0;
                            for ki in 0..spec.window {
                                let row = base + (ih0 + ki) * w + iw0;
                                for kj in 0..spec.window {
                                    let v = data[row + kj];
                                    if v > best {
                                        best = v;
                                        best_idx = row + kj;
                                    }
                                }
                            }
                            out[oi] = best;
                            argmax.as_mut().unwrap()[oi] = best_idx;
                        }
                        PoolKind::Average => {
                            let mut acc = 0.0;
                            for ki in 0..spec.window {
                                let row = base + (ih0 + ki) * w + iw0;
                                for kj in 0..spec.window {
                                    acc += data[row + kj];
                                }
                            }
                            out[oi] = acc * inv_area;
                        }
                    }
                    oi += 1;
                }
            }
        }
    }
    let output_shape = vec![batch, ch, out_h, out_w];
    Ok((
        Tensor::from_raw(output_shape.clone(), out),
        PoolRecord {
            spec: *spec,
            input_shape: x.shape().to_vec(),
            output_shape,
            argmax,
        },
    ))
}

pub fn pool_backward(record: &PoolRecord, grad_out: &Tensor) -> Result<Tensor> {
    if grad_out.shape() != record.output_shape {
        return Err(Error::ShapeMismatch(format!(
            "pool grad_out must be {:?}, got {:?}",
            record.output_shape,
            grad_out.shape()
        )));
    }
    let mut grad = vec![0.0; record.input_shape.iter().product()];
    let g = grad_out.data();
    match (&record.spec.kind, &record.argmax) {
        (PoolKind::Max, Some(argmax)) => {
            for (ai, &gv) in argmax.iter().zip(g) {
                grad[*ai] += gv;
            }
        }
        (PoolKind::Average, _) => {
            let spec = record.spec;
            let (batch, ch, h, w) = (
                record.input_shape[0],
                record.input_shape[1],
                record.input_shape[2],
                record.input_shape[3],
            );
            let (out_h, out_w) = (record.output_shape[2], record.output_shape[3]);
            let inv_area = 1.0 / (spec.window * spec.window) as f64;
            let mut oi = 0;
            for b in 0..batch {
                for c in 0..ch {
                    let base = (b * ch + c) * h * w;
                    for oh in 0..out_h {
                        for ow in 0..out_w {
                            let share = g[oi] * inv_area;
                            for ki in 0..spec.window {
                                let row = base + (oh * spec.stride + ki) * w + ow * spec.stride;
                                for kj in 0..spec.window {
                                    grad[row + kj] += share;
                                }
                            }
                            oi += 1;
                        }
                    }
                }
            }
        }
        (PoolKind::Max, None) => {
            return Err(Error::Contract(
                "max pool record is missing its argmax positions".into(),
            ))
        }
    }
    Ok(Tensor::from_raw(record.input_shape.clone(), grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: PoolKind) -> PoolSpec {
        PoolSpec::new(kind, 2, 2).unwrap()
    }

    #[test]
    fn max_pool_2x2() {
        let x = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, _) = pool_forward(&x, &spec(PoolKind::Max)).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[4.0]);
    }

    #[test]
    fn average_pool_2x2() {
        let x = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, _) = pool_forward(&x, &spec(PoolKind::Average)).unwrap();
        assert_eq!(y.data(), &[2.5]);
    }

    #[test]
    fn constant_input_stays_constant() {
        let x = Tensor::full(&[1, 2, 4, 4], 3.25).unwrap();
        for kind in [PoolKind::Max, PoolKind::Average] {
            let (y, _) = pool_forward(&x, &spec(kind)).unwrap();
            assert!(y.data().iter().all(|&v| v == 3.25));
        }
    }

    #[test]
    fn window_larger_than_input_is_an_error() {
        let x = Tensor::zeros(&[1, 1, 2, 2]).unwrap();
        let s = PoolSpec::new(PoolKind::Max, 3, 1).unwrap();
        assert!(matches!(
            pool_forward(&x, &s),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn max_backward_routes_to_argmax_and_conserves_mass() {
        let x = Tensor::from_vec(
            &[1, 1, 4, 4],
            vec![
                1.0, 2.0, 5.0, 3.0, //
                4.0, 0.0, 1.0, 2.0, //
                7.0, 1.0, 0.0, 9.0, //
                2.0, 3.0, 8.0, 1.0,
            ],
        )
        .unwrap();
        let (_, rec) = pool_forward(&x, &spec(PoolKind::Max)).unwrap();
        let g = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let gx = pool_backward(&rec, &g).unwrap();
        // argmax positions: 4.0 at (1,0), 5.0 at (0,2), 7.0 at (2,0), 9.0 at (2,3)
        let mut want = vec![0.0; 16];
        want[4] = 1.0;
        want[2] = 2.0;
        want[8] = 3.0;
        want[11] = 4.0;
        assert_eq!(gx.data(), want.as_slice());
        assert_eq!(gx.sum(), g.sum());
    }

    #[test]
    fn max_ties_break_to_first_row_major_position() {
        let x = Tensor::full(&[1, 1, 2, 2], 1.0).unwrap();
        let (_, rec) = pool_forward(&x, &spec(PoolKind::Max)).unwrap();
        let g = Tensor::ones(&[1, 1, 1, 1]).unwrap();
        let gx = pool_backward(&rec, &g).unwrap();
        assert_eq!(gx.data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn average_backward_distributes_uniformly() {
        let x = Tensor::zeros(&[1, 1, 2, 2]).unwrap();
        let (_, rec) = pool_forward(&x, &spec(PoolKind::Average)).unwrap();
        let g = Tensor::from_vec(&[1, 1, 1, 1], vec![8.0]).unwrap();
        let gx = pool_backward(&rec, &g).unwrap();
        assert_eq!(gx.data(), &[2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn overlapping_max_windows_accumulate() {
        // stride 1 with window 2: the global max is hit by several windows.
        let s = PoolSpec::new(PoolKind::Max, 2, 1).unwrap();
        let x = Tensor::from_vec(
            &[1, 1, 3, 3],
            vec![0.0, 0.0, 0.0, 0.0, 9.0, 0.0, 0.0, 0.0, 0.0],
        )
        .unwrap();
        let (_, rec) = pool_forward(&x, &s).unwrap();
        let g = Tensor::ones(&[1, 1, 2, 2]).unwrap();
        let gx = pool_backward(&rec, &g).unwrap();
        assert_eq!(gx.data()[4], 4.0);
        assert_eq!(gx.sum(), 4.0);
    }
}
