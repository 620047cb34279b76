//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A shape was empty, had a zero dimension, or element counts disagree.
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    /// Two operands (or an operand and a parameter record) disagree on shape.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A value that must be finite was NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A class or element index fell outside its valid range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// A probability row failed the softmax-output validity check.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// A class with no usable samples where at least one is required.
    #[error("degenerate class: {0}")]
    DegenerateClass(String),

    /// Image decoding failed; `offset` is the byte position of the problem.
    #[error("decode error at byte {offset}: {message}")]
    Decode { offset: usize, message: String },

    /// A run or dataset configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// Consecutive layers are incompatible or a model config cannot be realized.
    #[error("build error: {0}")]
    Build(String),

    /// Training produced a non-finite loss.
    #[error("divergence at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    /// A metric has no defined value on the given inputs.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Checkpoint bytes are malformed; `offset` is the byte position.
    #[error("checkpoint error at byte {offset}: {message}")]
    Checkpoint { offset: usize, message: String },

    /// An API contract was violated (e.g. backward with a stale cache).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
