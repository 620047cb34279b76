//! Desk-scale CNN training and evaluation laboratory.
//!
//! Everything runs on the CPU in `f64` and is deterministic end to end: seeded
//! synthetic gesture datasets, hand-written forward/backward passes for conv,
//! pooling, dense, and softmax layers, focal-loss training with SGD momentum,
//! macro AUC / macro Recall evaluation, and a bit-exact binary checkpoint
//! format. Every numerical component has an independent oracle in the test
//! suites (sliding-window convolution, pairwise AUC counting, central finite
//! differences).

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod layers;
pub mod loss;
pub mod model;
pub mod rng;
pub mod runconfig;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
