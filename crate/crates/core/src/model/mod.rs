//! Declarative model composition: a `ModelConfig` lists layers, `build` shape-
//! checks the whole pipeline symbolically and initializes parameters from the
//! config seed, and the resulting `Model` runs forward/backward passes.
//!
//! Composite blocks (residual, dense-connect) are layers of their own: the
//! block owns its convolutions and implements the skip/concat arithmetic in
//! both directions.

mod text;
mod zoo;

pub use zoo::{
    dense_cnn, dense_cnn_tiny, plain_cnn, plain_cnn_tiny, residual_cnn, residual_cnn_tiny,
};

use crate::error::{Error, Result};
use crate::layers::{
    conv2d_backward, conv2d_forward, conv_output_dims, dense_backward, dense_forward,
    pool_backward, pool_forward, relu_backward, relu_forward, softmax, ConvParams, DenseParams,
    PoolKind, PoolRecord, PoolSpec,
};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    Pool {
        kind: PoolKind,
        window: usize,
        stride: usize,
    },
    Flatten,
    Dense {
        units: usize,
    },
    Softmax,
    /// Two 3x3 stride-1 pad-1 convolutions with an identity skip:
    /// out = relu(conv2(relu(conv1(x))) + x). Channel count is preserved.
    ResidualBlock,
    /// `depth` 3x3 convolutions, each producing `growth` channels from the
    /// concatenation of the block input and all previous outputs. Block output
    /// concatenates everything: in + depth * growth channels.
    DenseBlock {
        depth: usize,
        growth: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    /// `[channels, height, width]`
    pub input_shape: [usize; 3],
    pub num_classes: usize,
    pub layers: Vec<LayerSpec>,
    pub init_seed: u64,
}

#[derive(Debug, Clone)]
enum Layer {
    Conv(ConvParams),
    Relu,
    Pool(PoolSpec),
    Flatten,
    Dense(DenseParams),
    Softmax,
    Residual {
        conv1: ConvParams,
        conv2: ConvParams,
    },
    DenseBlock {
        convs: Vec<ConvParams>,
    },
}

#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    layers: Vec<Layer>,
    /// Bumped on every parameter mutation; caches carry the version they were
    /// computed against.
    version: u64,
}

/// Symbolic activation shape used by the build-time checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SymShape {
    Spatial(usize, usize, usize),
    Flat(usize),
}

impl std::fmt::Display for SymShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SymShape::Spatial(c, h, w) => write!(f, "[{c}, {h}, {w}]"),
            SymShape::Flat(n) => write!(f, "[{n}]"),
        }
    }
}

fn incompatible(idx: usize, spec: &LayerSpec, prev: &str, reason: &str) -> Error {
    Error::Build(format!(
        "layer {idx} ({spec}) incompatible with {prev}: {reason}"
    ))
}

impl ModelConfig {
    /// Walks the layer list symbolically; returns the shape after every layer.
    fn check_shapes(&self) -> Result<Vec<SymShape>> {
        let [c, h, w] = self.input_shape;
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::Build(format!(
                "input shape [{c}, {h}, {w}] has a zero dimension"
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::Build(format!(
                "model needs at least 2 classes, got {}",
                self.num_classes
            )));
        }
        if self.layers.is_empty() {
            return Err(Error::Build("model has no layers".into()));
        }
        let mut shape = SymShape::Spatial(c, h, w);
        let mut prev = format!("input {shape}");
        let mut shapes = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (idx, spec) in self.layers.iter().enumerate() {
            if matches!(spec, LayerSpec::Softmax) != (idx == last) {
                return Err(Error::Build(format!(
                    "layer {idx} ({spec}): softmax must be the final layer and appear exactly once"
                )));
            }
            shape = match (spec, shape) {
                (
                    LayerSpec::Conv {
                        out_channels,
                        kernel,
                        stride,
                        padding,
                    },
                    SymShape::Spatial(_, h, w),
                ) => {
                    if *out_channels == 0 || *kernel == 0 || *stride == 0 {
                        return Err(Error::Build(format!(
                            "layer {idx} ({spec}): channels, kernel, and stride must be >= 1"
                        )));
                    }
                    let (oh, ow) = conv_output_dims(h, w, *kernel, *kernel, *stride, *padding)
                        .map_err(|e| incompatible(idx, spec, &prev, &e.to_string()))?;
                    SymShape::Spatial(*out_channels, oh, ow)
                }
                (LayerSpec::Relu, s) => s,
                (LayerSpec::Pool { window, stride, .. }, SymShape::Spatial(c, h, w)) => {
                    if *window == 0 || *stride == 0 {
                        return Err(Error::Build(format!(
                            "layer {idx} ({spec}): window and stride must be >= 1"
                        )));
                    }
                    if *window > h || *window > w {
                        return Err(incompatible(
                            idx,
                            spec,
                            &prev,
                            &format!("pool window {window} larger than input {h}x{w}"),
                        ));
                    }
                    SymShape::Spatial(c, (h - window) / stride + 1, (w - window) / stride + 1)
                }
                (LayerSpec::Flatten, SymShape::Spatial(c, h, w)) => SymShape::Flat(c * h * w),
                (LayerSpec::Dense { units }, SymShape::Flat(_)) => {
                    if *units == 0 {
                        return Err(Error::Build(format!(
                            "layer {idx} ({spec}): units must be >= 1"
                        )));
                    }
                    SymShape::Flat(*units)
                }
                (LayerSpec::Softmax, SymShape::Flat(n)) => {
                    if n != self.num_classes {
                        return Err(incompatible(
                            idx,
                            spec,
                            &prev,
                            &format!(
                                "softmax over {} classes fed {n} logits",
                                self.num_classes
                            ),
                        ));
                    }
                    SymShape::Flat(n)
                }
                (LayerSpec::ResidualBlock, SymShape::Spatial(c, h, w)) => {
                    // 3x3 pad-1 stride-1 convs preserve dims; skip needs >= 3x3 input.
                    conv_output_dims(h, w, 3, 3, 1, 1)
                        .map_err(|e| incompatible(idx, spec, &prev, &e.to_string()))?;
                    SymShape::Spatial(c, h, w)
                }
                (LayerSpec::DenseBlock { depth, growth }, SymShape::Spatial(c, h, w)) => {
                    if *depth == 0 || *growth == 0 {
                        return Err(Error::Build(format!(
                            "layer {idx} ({spec}): depth and growth must be >= 1"
                        )));
                    }
                    conv_output_dims(h, w, 3, 3, 1, 1)
                        .map_err(|e| incompatible(idx, spec, &prev, &e.to_string()))?;
                    SymShape::Spatial(c + depth * growth, h, w)
                }
                (_, s) => {
                    let need = match spec {
                        LayerSpec::Dense { .. } | LayerSpec::Softmax => {
                            "flat input (insert a flatten layer first)"
                        }
                        _ => "spatial input [channels, h, w]",
                    };
                    return Err(incompatible(
                        idx,
                        spec,
                        &prev,
                        &format!("needs {need}, got {s}"),
                    ));
                }
            };
            prev = format!("layer {idx} ({spec}) producing {shape}");
            shapes.push(shape);
        }
        match shapes.last() {
            Some(SymShape::Flat(n)) if *n == self.num_classes => Ok(shapes),
            other => Err(Error::Build(format!(
                "final layer must produce {} class probabilities, got {:?}",
                self.num_classes, other
            ))),
        }
    }
}

/// Channel-concatenation of same-sized 4-D tensors.
fn concat_channels(parts: &[&Tensor]) -> Tensor {
    let (batch, h, w) = (parts[0].dim(0), parts[0].dim(2), parts[0].dim(3));
    let total_c: usize = parts.iter().map(|t| t.dim(1)).sum();
    let plane = h * w;
    let mut out = vec![0.0; batch * total_c * plane];
    for b in 0..batch {
        let mut c_off = 0;
        for part in parts {
            let pc = part.dim(1);
            let src = b * pc * plane;
            let dst = (b * total_c + c_off) * plane;
            out[dst..dst + pc * plane].copy_from_slice(&part.data()[src..src + pc * plane]);
            c_off += pc;
        }
    }
    Tensor::from_raw(vec![batch, total_c, h, w], out)
}

/// Splits a 4-D tensor back into channel segments of the given sizes.
fn split_channels(t: &Tensor, sizes: &[usize]) -> Vec<Tensor> {
    let (batch, total_c, h, w) = (t.dim(0), t.dim(1), t.dim(2), t.dim(3));
    debug_assert_eq!(sizes.iter().sum::<usize>(), total_c);
    let plane = h * w;
    let mut parts = Vec::with_capacity(sizes.len());
    let mut c_off = 0;
    for &pc in sizes {
        let mut data = vec![0.0; batch * pc * plane];
        for b in 0..batch {
            let src = (b * total_c + c_off) * plane;
            let dst = b * pc * plane;
            data[dst..dst + pc * plane].copy_from_slice(&t.data()[src..src + pc * plane]);
        }
        parts.push(Tensor::from_raw(vec![batch, pc, h, w], data));
        c_off += pc;
    }
    parts
}

#[derive(Debug)]
enum LayerCache {
    Conv { input: Tensor },
    Relu { input: Tensor },
    Pool { record: PoolRecord },
    Flatten { input_shape: Vec<usize> },
    Dense { input: Tensor },
    Softmax,
    Residual {
        input: Tensor,
        pre1: Tensor,
        hidden: Tensor,
        pre_out: Tensor,
    },
    DenseBlock {
        features: Vec<Tensor>,
        pre_activations: Vec<Tensor>,
    },
}

/// Per-layer activations from a forward pass; consumed by `Model::backward`.
#[derive(Debug)]
pub struct ForwardCache {
    version: u64,
    batch: usize,
    layers: Vec<LayerCache>,
}

impl Model {
    pub fn build(config: ModelConfig) -> Result<Model> {
        config.check_shapes()?;
        let mut rng = Rng::new(config.init_seed);
        let [c0, h0, w0] = config.input_shape;
        let mut shape = SymShape::Spatial(c0, h0, w0);
        let mut layers = Vec::with_capacity(config.layers.len());
        for spec in &config.layers {
            let (layer, next) = match (spec, shape) {
                (
                    LayerSpec::Conv {
                        out_channels,
                        kernel,
                        stride,
                        padding,
                    },
                    SymShape::Spatial(c, h, w),
                ) => {
                    let params =
                        ConvParams::he_init(c, *out_channels, *kernel, *stride, *padding, &mut rng);
                    let (oh, ow) =
                        conv_output_dims(h, w, *kernel, *kernel, *stride, *padding)?;
                    (
                        Layer::Conv(params),
                        SymShape::Spatial(*out_channels, oh, ow),
                    )
                }
                (LayerSpec::Relu, s) => (Layer::Relu, s),
                (
                    LayerSpec::Pool {
                        kind,
                        window,
                        stride,
                    },
                    SymShape::Spatial(c, h, w),
                ) => (
                    Layer::Pool(PoolSpec::new(*kind, *window, *stride)?),
                    SymShape::Spatial(c, (h - window) / stride + 1, (w - window) / stride + 1),
                ),
                (LayerSpec::Flatten, SymShape::Spatial(c, h, w)) => {
                    (Layer::Flatten, SymShape::Flat(c * h * w))
                }
                (LayerSpec::Dense { units }, SymShape::Flat(n)) => (
                    Layer::Dense(DenseParams::he_init(n, *units, &mut rng)),
                    SymShape::Flat(*units),
                ),
                (LayerSpec::Softmax, s) => (Layer::Softmax, s),
                (LayerSpec::ResidualBlock, SymShape::Spatial(c, h, w)) => {
                    let conv1 = ConvParams::he_init(c, c, 3, 1, 1, &mut rng);
                    let conv2 = ConvParams::he_init(c, c, 3, 1, 1, &mut rng);
                    (Layer::Residual { conv1, conv2 }, SymShape::Spatial(c, h, w))
                }
                (LayerSpec::DenseBlock { depth, growth }, SymShape::Spatial(c, h, w)) => {
                    let convs = (0..*depth)
                        .map(|i| ConvParams::he_init(c + i * growth, *growth, 3, 1, 1, &mut rng))
                        .collect();
                    (
                        Layer::DenseBlock { convs },
                        SymShape::Spatial(c + depth * growth, h, w),
                    )
                }
                // check_shapes already rejected every other combination.
                _ => unreachable!("shape-checked config"),
            };
            layers.push(layer);
            shape = next;
        }
        Ok(Model {
            config,
            layers,
            version: 0,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.config.input_shape
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        let [c, h, w] = self.config.input_shape;
        if x.rank() != 4 || x.dim(1) != c || x.dim(2) != h || x.dim(3) != w {
            return Err(Error::ShapeMismatch(format!(
                "model expects input [batch, {c}, {h}, {w}], got {:?}",
                x.shape()
            )));
        }
        Ok(x.dim(0))
    }

    /// Runs the network; returns class probabilities `[batch, C]` and the
    /// activation cache the backward pass needs.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ForwardCache)> {
        let batch = self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut act = x.clone();
        for layer in &self.layers {
            act = match layer {
                Layer::Conv(p) => {
                    let out = conv2d_forward(&act, p)?;
                    caches.push(LayerCache::Conv { input: act });
                    out
                }
                Layer::Relu => {
                    let out = relu_forward(&act);
                    caches.push(LayerCache::Relu { input: act });
                    out
                }
                Layer::Pool(spec) => {
                    let (out, record) = pool_forward(&act, spec)?;
                    caches.push(LayerCache::Pool { record });
                    out
                }
                Layer::Flatten => {
                    let shape = act.shape().to_vec();
                    let flat = act.reshape(&[shape[0], shape[1] * shape[2] * shape[3]])?;
                    caches.push(LayerCache::Flatten { input_shape: shape });
                    flat
                }
                Layer::Dense(p) => {
                    let out = dense_forward(&act, p)?;
                    caches.push(LayerCache::Dense { input: act });
                    out
                }
                Layer::Softmax => {
                    let out = softmax(&act)?;
                    caches.push(LayerCache::Softmax);
                    out
                }
                Layer::Residual { conv1, conv2 } => {
                    let pre1 = conv2d_forward(&act, conv1)?;
                    let hidden = relu_forward(&pre1);
                    let pre2 = conv2d_forward(&hidden, conv2)?;
                    let pre_out = pre2.add(&act)?;
                    let out = relu_forward(&pre_out);
                    caches.push(LayerCache::Residual {
                        input: act,
                        pre1,
                        hidden,
                        pre_out,
                    });
                    out
                }
                Layer::DenseBlock { convs } => {
                    let mut features = vec![act];
                    let mut pre_activations = Vec::with_capacity(convs.len());
                    for conv in convs {
                        let input = concat_channels(&features.iter().collect::<Vec<_>>());
                        let pre = conv2d_forward(&input, conv)?;
                        features.push(relu_forward(&pre));
                        pre_activations.push(pre);
                    }
                    let out = concat_channels(&features.iter().collect::<Vec<_>>());
                    caches.push(LayerCache::DenseBlock {
                        features,
                        pre_activations,
                    });
                    out
                }
            };
        }
        Ok((
            act,
            ForwardCache {
                version: self.version,
                batch,
                layers: caches,
            },
        ))
    }

    /// Backpropagates from the logit gradient down to every parameter.
    /// `grad_logits` is the gradient of the scalar loss with respect to the
    /// pre-softmax logits (what the loss module returns). Returns one gradient
    /// tensor per parameter, aligned with `params()`.
    pub fn backward(&self, cache: &ForwardCache, grad_logits: &Tensor) -> Result<Vec<Tensor>> {
        if cache.version != self.version {
            return Err(Error::Contract(
                "stale forward cache: parameters were updated after the forward pass".into(),
            ));
        }
        if cache.layers.len() != self.layers.len() {
            return Err(Error::Contract(
                "forward cache does not match this model's layer list".into(),
            ));
        }
        if grad_logits.shape() != [cache.batch, self.config.num_classes] {
            return Err(Error::ShapeMismatch(format!(
                "grad_logits must be [{}, {}], got {:?}",
                cache.batch,
                self.config.num_classes,
                grad_logits.shape()
            )));
        }
        // Parameter gradients per layer, filled while walking backwards.
        let mut per_layer: Vec<Vec<Tensor>> = vec![Vec::new(); self.layers.len()];
        let mut grad = grad_logits.clone();
        for (idx, (layer, lc)) in self
            .layers
            .iter()
            .zip(&cache.layers)
            .enumerate()
            .rev()
        {
            grad = match (layer, lc) {
                // grad_logits already lives below the softmax.
                (Layer::Softmax, LayerCache::Softmax) => grad,
                (Layer::Dense(p), LayerCache::Dense { input }) => {
                    let g = dense_backward(input, p, &grad)?;
                    per_layer[idx] = vec![g.weights, g.bias];
                    g.input
                }
                (Layer::Flatten, LayerCache::Flatten { input_shape }) => {
                    grad.reshape(input_shape)?
                }
                (Layer::Pool(_), LayerCache::Pool { record }) => pool_backward(record, &grad)?,
                (Layer::Relu, LayerCache::Relu { input }) => relu_backward(input, &grad)?,
                (Layer::Conv(p), LayerCache::Conv { input }) => {
                    let g = conv2d_backward(input, p, &grad)?;
                    per_layer[idx] = vec![g.weights, g.bias];
                    g.input
                }
                (
                    Layer::Residual { conv1, conv2 },
                    LayerCache::Residual {
                        input,
                        pre1,
                        hidden,
                        pre_out,
                    },
                ) => {
                    let g_sum = relu_backward(pre_out, &grad)?;
                    let g2 = conv2d_backward(hidden, conv2, &g_sum)?;
                    let g_pre1 = relu_backward(pre1, &g2.input)?;
                    let g1 = conv2d_backward(input, conv1, &g_pre1)?;
                    per_layer[idx] = vec![g1.weights, g1.bias, g2.weights, g2.bias];
                    // Branch gradient plus the identity-path gradient.
                    g1.input.add(&g_sum)?
                }
                (
                    Layer::DenseBlock { convs },
                    LayerCache::DenseBlock {
                        features,
                        pre_activations,
                    },
                ) => {
                    let sizes: Vec<usize> = features.iter().map(|f| f.dim(1)).collect();
                    let mut acc = split_channels(&grad, &sizes);
                    let mut param_grads = vec![Vec::new(); convs.len()];
                    for i in (0..convs.len()).rev() {
                        let g_pre = relu_backward(&pre_activations[i], &acc[i + 1])?;
                        let input = concat_channels(&features[..=i].iter().collect::<Vec<_>>());
                        let g = conv2d_backward(&input, &convs[i], &g_pre)?;
                        param_grads[i] = vec![g.weights, g.bias];
                        for (a, part) in acc
                            .iter_mut()
                            .zip(split_channels(&g.input, &sizes[..=i]))
                        {
                            *a = a.add(&part)?;
                        }
                    }
                    per_layer[idx] = param_grads.into_iter().flatten().collect();
                    acc.swap_remove(0)
                }
                _ => {
                    return Err(Error::Contract(
                        "forward cache does not match this model's layer list".into(),
                    ))
                }
            };
        }
        Ok(per_layer.into_iter().flatten().collect())
    }

    /// All parameter tensors in a fixed order (layer order, weights before
    /// bias). Gradients from `backward`, SGD velocity, and checkpoints all
    /// align with this order.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(p) => out.extend([&p.weights, &p.bias]),
                Layer::Dense(p) => out.extend([&p.weights, &p.bias]),
                Layer::Residual { conv1, conv2 } => {
                    out.extend([&conv1.weights, &conv1.bias, &conv2.weights, &conv2.bias])
                }
                Layer::DenseBlock { convs } => {
                    for c in convs {
                        out.extend([&c.weights, &c.bias]);
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// Stable names for the tensors returned by `params()`, used by the
    /// checkpoint format.
    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (idx, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv(_) => {
                    out.push(format!("layer{idx}.weights"));
                    out.push(format!("layer{idx}.bias"));
                }
                Layer::Dense(_) => {
                    out.push(format!("layer{idx}.weights"));
                    out.push(format!("layer{idx}.bias"));
                }
                Layer::Residual { .. } => {
                    for conv in ["conv1", "conv2"] {
                        out.push(format!("layer{idx}.{conv}.weights"));
                        out.push(format!("layer{idx}.{conv}.bias"));
                    }
                }
                Layer::DenseBlock { convs } => {
                    for i in 0..convs.len() {
                        out.push(format!("layer{idx}.conv{i}.weights"));
                        out.push(format!("layer{idx}.conv{i}.bias"));
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Mutable access to one parameter tensor (indices align with `params()`).
    /// Invalidates outstanding forward caches.
    pub fn param_mut(&mut self, index: usize) -> &mut Tensor {
        self.version += 1;
        let mut seen = 0;
        for layer in &mut self.layers {
            let slots: Vec<&mut Tensor> = match layer {
                Layer::Conv(p) => vec![&mut p.weights, &mut p.bias],
                Layer::Dense(p) => vec![&mut p.weights, &mut p.bias],
                Layer::Residual { conv1, conv2 } => vec![
                    &mut conv1.weights,
                    &mut conv1.bias,
                    &mut conv2.weights,
                    &mut conv2.bias,
                ],
                Layer::DenseBlock { convs } => convs
                    .iter_mut()
                    .flat_map(|c| [&mut c.weights, &mut c.bias])
                    .collect(),
                _ => vec![],
            };
            for slot in slots {
                if seen == index {
                    return slot;
                }
                seen += 1;
            }
        }
        panic!("parameter index {index} out of range ({seen} parameters)");
    }

    /// Replaces every parameter tensor; shapes must match exactly.
    pub fn set_params(&mut self, new_params: &[Tensor]) -> Result<()> {
        let shapes: Vec<Vec<usize>> = self.params().iter().map(|t| t.shape().to_vec()).collect();
        if new_params.len() != shapes.len() {
            return Err(Error::ShapeMismatch(format!(
                "model has {} parameter tensors, got {}",
                shapes.len(),
                new_params.len()
            )));
        }
        for (i, (t, shape)) in new_params.iter().zip(&shapes).enumerate() {
            if t.shape() != shape.as_slice() {
                return Err(Error::ShapeMismatch(format!(
                    "parameter {i} must have shape {shape:?}, got {:?}",
                    t.shape()
                )));
            }
        }
        for (i, t) in new_params.iter().enumerate() {
            *self.param_mut(i) = t.clone();
        }
        Ok(())
    }
}
