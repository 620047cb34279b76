//! Image decoding, the preprocessing chain (grayscale, resize, normalize), a
//! seeded synthetic gesture generator, and deterministic dataset plumbing
//! (stratified splits, batches, class-imbalance subsampling, directory I/O).

mod dataset;
mod image;
mod synth;

pub use dataset::{
    batches, export_dataset, imbalance, load_directory, sequential_batches, split, Batch, Dataset,
    Provenance, Sample,
};
pub use image::{
    decode_image, denormalize, encode_image, normalize, resize_bilinear, to_grayscale, ImageBuffer,
};
pub use synth::{render_template, synth_gestures, ShapeKind};
