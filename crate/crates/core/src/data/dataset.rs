//! Labeled sample collections and the deterministic operations on them:
//! stratified splits, epoch batching, class-imbalance subsampling, and the
//! directory layout `<root>/<class-name>/*.pgm` (class index = lexicographic
//! rank of the class name).

use crate::data::image::{
    decode_image, denormalize, encode_image, normalize, resize_bilinear, to_grayscale,
};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct Sample {
    /// Preprocessed image, `[1, S, S]`, values in [0, 1].
    pub image: Tensor,
    pub label: usize,
    pub source_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Synthetic { seed: u64 },
    Directory { path: PathBuf },
}

#[derive(Debug, Clone)]
pub struct Dataset {
    class_names: Vec<String>,
    samples: Vec<Sample>,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(
        class_names: Vec<String>,
        samples: Vec<Sample>,
        provenance: Provenance,
    ) -> Result<Dataset> {
        if class_names.len() < 2 {
            return Err(Error::Config(format!(
                "dataset needs at least 2 classes, got {}",
                class_names.len()
            )));
        }
        let mut counts = vec![0usize; class_names.len()];
        let mut shape: Option<Vec<usize>> = None;
        for s in &samples {
            if s.label >= class_names.len() {
                return Err(Error::IndexOutOfRange(format!(
                    "sample \"{}\" has label {} but there are {} classes",
                    s.source_id,
                    s.label,
                    class_names.len()
                )));
            }
            counts[s.label] += 1;
            match &shape {
                None => shape = Some(s.image.shape().to_vec()),
                Some(sh) if sh.as_slice() != s.image.shape() => {
                    return Err(Error::ShapeMismatch(format!(
                        "sample \"{}\" has shape {:?}, expected {sh:?}",
                        s.source_id,
                        s.image.shape()
                    )))
                }
                _ => {}
            }
            if s.image.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidDistribution(format!(
                    "sample \"{}\" has pixel values outside [0, 1]",
                    s.source_id
                )));
            }
        }
        if let Some(idx) = counts.iter().position(|&c| c == 0) {
            return Err(Error::DegenerateClass(format!(
                "class \"{}\" has no samples",
                class_names[idx]
            )));
        }
        Ok(Dataset {
            class_names,
            samples,
            provenance,
        })
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.class_names.len()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Side length of the (square) sample images.
    pub fn image_size(&self) -> usize {
        self.samples[0].image.dim(1)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }
}

/// Stratified split: per class, a seeded shuffle, then floor(fraction * n)
/// samples to the training side. Both sides keep the original sample order.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = Rng::new(seed);
    let mut is_train = vec![false; dataset.len()];
    for class in 0..dataset.num_classes() {
        let mut indices: Vec<usize> = dataset
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == class)
            .map(|(i, _)| i)
            .collect();
        rng.shuffle(&mut indices);
        let n_train = (train_fraction * indices.len() as f64).floor() as usize;
        if n_train == 0 || n_train == indices.len() {
            return Err(Error::Config(format!(
                "fraction {train_fraction} leaves class \"{}\" empty on one side ({} samples)",
                dataset.class_names[class],
                indices.len()
            )));
        }
        for &i in &indices[..n_train] {
            is_train[i] = true;
        }
    }
    let pick = |keep: bool| -> Vec<Sample> {
        dataset
            .samples
            .iter()
            .zip(&is_train)
            .filter(|(_, &t)| t == keep)
            .map(|(s, _)| s.clone())
            .collect()
    };
    Ok((
        Dataset::new(
            dataset.class_names.clone(),
            pick(true),
            dataset.provenance.clone(),
        )?,
        Dataset::new(
            dataset.class_names.clone(),
            pick(false),
            dataset.provenance.clone(),
        )?,
    ))
}

#[derive(Debug, Clone)]
pub struct Batch {
    /// `[batch, 1, S, S]`
    pub images: Tensor,
    pub labels: Vec<usize>,
}

/// Seeded shuffle of the whole epoch, chunked; the final short batch is kept.
pub fn batches(dataset: &Dataset, batch_size: usize, shuffle_seed: u64) -> Result<Vec<Batch>> {
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    Rng::new(shuffle_seed).shuffle(&mut order);
    batches_in_order(dataset, batch_size, order)
}

/// Batches in stored sample order (used for evaluation, where the order must
/// not depend on a shuffle seed).
pub fn sequential_batches(dataset: &Dataset, batch_size: usize) -> Result<Vec<Batch>> {
    batches_in_order(dataset, batch_size, (0..dataset.len()).collect())
}

fn batches_in_order(dataset: &Dataset, batch_size: usize, order: Vec<usize>) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be >= 1".into()));
    }
    let size = dataset.image_size();
    let plane = size * size;
    let mut out = Vec::with_capacity(dataset.len().div_ceil(batch_size));
    for chunk in order.chunks(batch_size) {
        let mut data = Vec::with_capacity(chunk.len() * plane);
        let mut labels = Vec::with_capacity(chunk.len());
        for &i in chunk {
            data.extend_from_slice(dataset.samples[i].image.data());
            labels.push(dataset.samples[i].label);
        }
        out.push(Batch {
            images: Tensor::from_raw(vec![chunk.len(), 1, size, size], data),
            labels,
        });
    }
    Ok(out)
}

/// Deterministic per-class subsampling: class c keeps
/// round(keep_fractions[c] * count_c) samples, chosen by seeded shuffle.
pub fn imbalance(dataset: &Dataset, keep_fractions: &[f64], seed: u64) -> Result<Dataset> {
    if keep_fractions.len() != dataset.num_classes() {
        return Err(Error::Config(format!(
            "{} keep fractions for {} classes",
            keep_fractions.len(),
            dataset.num_classes()
        )));
    }
    if let Some(&bad) = keep_fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::Config(format!(
            "keep fractions must lie in (0, 1], got {bad}"
        )));
    }
    let mut rng = Rng::new(seed);
    let mut keep = vec![false; dataset.len()];
    for (class, &fraction) in keep_fractions.iter().enumerate() {
        let mut indices: Vec<usize> = dataset
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == class)
            .map(|(i, _)| i)
            .collect();
        rng.shuffle(&mut indices);
        let n_keep = (fraction * indices.len() as f64).round() as usize;
        if n_keep == 0 {
            return Err(Error::DegenerateClass(format!(
                "keep fraction {fraction} empties class \"{}\"",
                dataset.class_names[class]
            )));
        }
        for &i in &indices[..n_keep] {
            keep[i] = true;
        }
    }
    let samples = dataset
        .samples
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(s, _)| s.clone())
        .collect();
    Dataset::new(
        dataset.class_names.clone(),
        samples,
        dataset.provenance.clone(),
    )
}

/// Loads `<root>/<class-name>/*.pgm|*.ppm`, preprocessing every image to a
/// normalized `size x size` grayscale tensor. Class index is the
/// lexicographic rank of the class directory name.
pub fn load_directory(root: &Path, size: usize) -> Result<Dataset> {
    let mut class_dirs: Vec<(String, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(root)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            let name = entry.file_name().to_string_lossy().into_owned();
            class_dirs.push((name, entry.path()));
        }
    }
    class_dirs.sort();
    if class_dirs.len() < 2 {
        return Err(Error::Config(format!(
            "dataset directory {} has {} class subdirectories, need at least 2",
            root.display(),
            class_dirs.len()
        )));
    }
    let mut samples = Vec::new();
    for (label, (_, dir)) in class_dirs.iter().enumerate() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("pgm") | Some("ppm")
                )
            })
            .collect();
        files.sort();
        for path in files {
            let bytes = std::fs::read(&path)?;
            let img = decode_image(&bytes)?;
            let gray = to_grayscale(&img);
            let resized = resize_bilinear(&gray, size)?;
            let image = normalize(&resized)?;
            samples.push(Sample {
                image,
                label,
                source_id: path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
            });
        }
    }
    Dataset::new(
        class_dirs.into_iter().map(|(n, _)| n).collect(),
        samples,
        Provenance::Directory {
            path: root.to_path_buf(),
        },
    )
}

/// Writes the dataset in the directory layout `load_directory` reads:
/// `<root>/<class-name>/<source_id>.pgm`.
pub fn export_dataset(dataset: &Dataset, root: &Path) -> Result<()> {
    for (label, name) in dataset.class_names.iter().enumerate() {
        let dir = root.join(name);
        std::fs::create_dir_all(&dir)?;
        for s in dataset.samples.iter().filter(|s| s.label == label) {
            let img = denormalize(&s.image)?;
            std::fs::write(dir.join(format!("{}.pgm", s.source_id)), encode_image(&img))?;
        }
    }
    Ok(())
}
