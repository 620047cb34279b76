//! Three fixed desk-scale architectures sharing a comparable parameter budget
//! (pairwise within 2x): a plain six-conv stack, the same depth with identity
//! skips every two convolutions, and a densely-connected variant with
//! transition convs between blocks. The `*_tiny` versions keep each structural
//! mechanism but shrink to a few hundred parameters so exhaustive gradient
//! checking stays fast.

use super::{LayerSpec, ModelConfig};
use crate::error::{Error, Result};
use crate::layers::PoolKind;

fn check_input(input_shape: [usize; 3]) -> Result<()> {
    let [c, h, w] = input_shape;
    if c == 0 {
        return Err(Error::Config("input needs at least 1 channel".into()));
    }
    if h < 16 || w < 16 {
        return Err(Error::Config(format!(
            "zoo architectures need spatial dims >= 16, got {h}x{w}"
        )));
    }
    Ok(())
}

fn conv3(out_channels: usize) -> LayerSpec {
    LayerSpec::Conv {
        out_channels,
        kernel: 3,
        stride: 1,
        padding: 1,
    }
}

fn conv1(out_channels: usize) -> LayerSpec {
    LayerSpec::Conv {
        out_channels,
        kernel: 1,
        stride: 1,
        padding: 0,
    }
}

fn pool2() -> LayerSpec {
    LayerSpec::Pool {
        kind: PoolKind::Max,
        window: 2,
        stride: 2,
    }
}

fn head(num_classes: usize) -> [LayerSpec; 3] {
    [
        LayerSpec::Flatten,
        LayerSpec::Dense { units: num_classes },
        LayerSpec::Softmax,
    ]
}

/// Plain stacked CNN: six 3x3 convolutions with interleaved max pools and no
/// cross-layer connections.
pub fn plain_cnn(input_shape: [usize; 3], num_classes: usize, seed: u64) -> Result<ModelConfig> {
    check_input(input_shape)?;
    let mut layers = vec![
        conv3(8),
        LayerSpec::Relu,
        pool2(),
        conv3(16),
        LayerSpec::Relu,
        pool2(),
        conv3(16),
        LayerSpec::Relu,
        conv3(24),
        LayerSpec::Relu,
        pool2(),
        conv3(24),
        LayerSpec::Relu,
        conv3(24),
        LayerSpec::Relu,
        pool2(),
    ];
    layers.extend(head(num_classes));
    Ok(ModelConfig {
        input_shape,
        num_classes,
        layers,
        init_seed: seed,
    })
}

/// Same conv depth as the plain stack, but the middle four convolutions live
/// in two identity-skip residual blocks.
pub fn residual_cnn(input_shape: [usize; 3], num_classes: usize, seed: u64) -> Result<ModelConfig> {
    check_input(input_shape)?;
    let mut layers = vec![
        conv3(16),
        LayerSpec::Relu,
        pool2(),
        LayerSpec::ResidualBlock,
        pool2(),
        LayerSpec::ResidualBlock,
        pool2(),
        conv3(32),
        LayerSpec::Relu,
        pool2(),
    ];
    layers.extend(head(num_classes));
    Ok(ModelConfig {
        input_shape,
        num_classes,
        layers,
        init_seed: seed,
    })
}

/// Densely-connected variant: two dense blocks whose convolutions see the
/// concatenation of everything before them, with 1x1 conv + pool transitions.
pub fn dense_cnn(input_shape: [usize; 3], num_classes: usize, seed: u64) -> Result<ModelConfig> {
    check_input(input_shape)?;
    let mut layers = vec![
        conv3(8),
        LayerSpec::Relu,
        pool2(),
        LayerSpec::DenseBlock {
            depth: 2,
            growth: 12,
        },
        conv1(24),
        LayerSpec::Relu,
        pool2(),
        LayerSpec::DenseBlock {
            depth: 2,
            growth: 16,
        },
        conv1(32),
        LayerSpec::Relu,
        pool2(),
    ];
    layers.extend(head(num_classes));
    Ok(ModelConfig {
        input_shape,
        num_classes,
        layers,
        init_seed: seed,
    })
}

/// Tiny plain stack on 1x8x8 input, a few hundred parameters.
pub fn plain_cnn_tiny(num_classes: usize, seed: u64) -> ModelConfig {
    let mut layers = vec![
        conv3(2),
        LayerSpec::Relu,
        pool2(),
        conv3(3),
        LayerSpec::Relu,
        pool2(),
    ];
    layers.extend(head(num_classes));
    ModelConfig {
        input_shape: [1, 8, 8],
        num_classes,
        layers,
        init_seed: seed,
    }
}

/// Tiny residual model on 1x8x8 input.
pub fn residual_cnn_tiny(num_classes: usize, seed: u64) -> ModelConfig {
    let mut layers = vec![
        conv3(3),
        LayerSpec::Relu,
        pool2(),
        LayerSpec::ResidualBlock,
        pool2(),
    ];
    layers.extend(head(num_classes));
    ModelConfig {
        input_shape: [1, 8, 8],
        num_classes,
        layers,
        init_seed: seed,
    }
}

/// Tiny densely-connected model on 1x8x8 input.
pub fn dense_cnn_tiny(num_classes: usize, seed: u64) -> ModelConfig {
    let mut layers = vec![
        conv3(2),
        LayerSpec::Relu,
        pool2(),
        LayerSpec::DenseBlock { depth: 2, growth: 2 },
        conv1(3),
        LayerSpec::Relu,
        pool2(),
    ];
    layers.extend(head(num_classes));
    ModelConfig {
        input_shape: [1, 8, 8],
        num_classes,
        layers,
        init_seed: seed,
    }
}
