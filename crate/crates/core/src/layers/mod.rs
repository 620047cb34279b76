//! Forward and backward passes for the layer kinds the models are built from:
//! convolution, ReLU, pooling, dense, softmax.
//!
//! Each forward has an exact analytic backward; all of them are pure functions
//! over immutable parameter records. Gradient-check suites in `tests/` hold
//! every backward to central finite differences.

mod activation;
mod conv;
mod dense;
mod pool;

pub use activation::{relu_backward, relu_forward, softmax};
pub use conv::{conv2d_backward, conv2d_forward, conv_output_dims, ConvGrads, ConvParams};
pub use dense::{dense_backward, dense_forward, DenseGrads, DenseParams};
pub use pool::{pool_backward, pool_forward, PoolKind, PoolRecord, PoolSpec};
