//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "GCNL"                      4 bytes
//! format version                    u32
//! header length                     u64
//! header                            UTF-8 key = value lines (see below)
//! per parameter tensor, in model order:
//!   name length                     u64
//!   name                            UTF-8
//!   rank                            u32
//!   dims                            rank x u64
//!   values                          product(dims) x f64 (IEEE-754 LE)
//! ```
//!
//! The header carries the class names, training metadata, and the model
//! config in its canonical text form (keys prefixed `model.`). Serialization
//! is canonical: saving a loaded checkpoint reproduces the file byte for byte.

use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::tensor::Tensor;
use std::path::Path;

const MAGIC: &[u8; 4] = b"GCNL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FinalMetrics {
    pub val_auc: f64,
    pub val_recall: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub class_names: Vec<String>,
    pub seed: u64,
    pub epochs_completed: usize,
    pub final_metrics: Option<FinalMetrics>,
}

fn render_header(config: &ModelConfig, meta: &CheckpointMeta) -> Result<String> {
    for name in &meta.class_names {
        if name.is_empty() || name.contains(',') || name.contains('\n') || name.contains('=') {
            return Err(Error::Config(format!(
                "class name \"{name}\" cannot be stored (empty or contains , = or newline)"
            )));
        }
    }
    if meta.class_names.len() != config.num_classes {
        return Err(Error::Config(format!(
            "{} class names for a {}-class model",
            meta.class_names.len(),
            config.num_classes
        )));
    }
    let mut out = format!(
        "class_names = {}\nseed = {}\nepochs_completed = {}\n",
        meta.class_names.join(","),
        meta.seed,
        meta.epochs_completed
    );
    if let Some(m) = &meta.final_metrics {
        out.push_str(&format!(
            "final_val_auc = {}\nfinal_val_recall = {}\nfinal_val_accuracy = {}\n",
            m.val_auc, m.val_recall, m.val_accuracy
        ));
    }
    for line in config.to_text().lines() {
        out.push_str("model.");
        out.push_str(line);
        out.push('\n');
    }
    Ok(out)
}

fn parse_header(text: &str) -> Result<(ModelConfig, CheckpointMeta)> {
    let mut class_names = None;
    let mut seed = None;
    let mut epochs_completed = None;
    let mut val_auc = None;
    let mut val_recall = None;
    let mut val_accuracy = None;
    let mut model_text = String::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("model.") {
            model_text.push_str(rest);
            model_text.push('\n');
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("bad checkpoint header line \"{line}\"")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "class_names" => {
                class_names = Some(value.split(',').map(str::to_owned).collect::<Vec<_>>())
            }
            "seed" => {
                seed = Some(value.parse::<u64>().map_err(|_| {
                    Error::Config(format!("bad checkpoint seed \"{value}\""))
                })?)
            }
            "epochs_completed" => {
                epochs_completed = Some(value.parse::<usize>().map_err(|_| {
                    Error::Config(format!("bad checkpoint epochs_completed \"{value}\""))
                })?)
            }
            "final_val_auc" | "final_val_recall" | "final_val_accuracy" => {
                let v = value.parse::<f64>().map_err(|_| {
                    Error::Config(format!("bad checkpoint metric \"{value}\""))
                })?;
                match key {
                    "final_val_auc" => val_auc = Some(v),
                    "final_val_recall" => val_recall = Some(v),
                    _ => val_accuracy = Some(v),
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown checkpoint header key \"{other}\""
                )))
            }
        }
    }
    let config = ModelConfig::from_text(&model_text)?;
    let final_metrics = match (val_auc, val_recall, val_accuracy) {
        (Some(a), Some(r), Some(acc)) => Some(FinalMetrics {
            val_auc: a,
            val_recall: r,
            val_accuracy: acc,
        }),
        (None, None, None) => None,
        _ => {
            return Err(Error::Config(
                "checkpoint has a partial final-metrics block".into(),
            ))
        }
    };
    Ok((
        config,
        CheckpointMeta {
            class_names: class_names
                .ok_or_else(|| Error::Config("checkpoint header missing class_names".into()))?,
            seed: seed.ok_or_else(|| Error::Config("checkpoint header missing seed".into()))?,
            epochs_completed: epochs_completed
                .ok_or_else(|| Error::Config("checkpoint header missing epochs_completed".into()))?,
            final_metrics,
        },
    ))
}

/// Serializes the model and its metadata to checkpoint bytes.
pub fn checkpoint_to_bytes(model: &Model, meta: &CheckpointMeta) -> Result<Vec<u8>> {
    let header = render_header(model.config(), meta)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for (name, tensor) in model.param_names().iter().zip(model.params()) {
        out.extend_from_slice(&(name.len() as u64).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(tensor.rank() as u32).to_le_bytes());
        for &dim in tensor.shape() {
            out.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        for &v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Checkpoint {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(format!(
                "truncated: need {n} bytes for {what}, {} left",
                self.bytes.len() - self.pos
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn read_u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn read_u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Parses checkpoint bytes back into a model (parameters bit-identical to the
/// saved ones) and its metadata.
pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<(Model, CheckpointMeta)> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Checkpoint {
            offset: 0,
            message: format!("bad magic {:?}", String::from_utf8_lossy(magic)),
        });
    }
    let version = r.read_u32("format version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint {
            offset: 4,
            message: format!("unsupported format version {version} (expected {FORMAT_VERSION})"),
        });
    }
    let header_len = r.read_u64("header length")? as usize;
    let header_at = r.pos;
    let header = std::str::from_utf8(r.take(header_len, "header")?).map_err(|e| {
        Error::Checkpoint {
            offset: header_at + e.valid_up_to(),
            message: "header is not valid UTF-8".into(),
        }
    })?;
    let (config, meta) = parse_header(header)?;
    let mut model = Model::build(config)?;
    let expected_names = model.param_names();
    let expected_shapes: Vec<Vec<usize>> = model
        .params()
        .iter()
        .map(|t| t.shape().to_vec())
        .collect();
    for (i, (name, shape)) in expected_names.iter().zip(&expected_shapes).enumerate() {
        let name_len = r.read_u64("parameter name length")? as usize;
        let at = r.pos;
        let got_name = std::str::from_utf8(r.take(name_len, "parameter name")?).map_err(|_| {
            Error::Checkpoint {
                offset: at,
                message: "parameter name is not valid UTF-8".into(),
            }
        })?;
        if got_name != name {
            return Err(Error::Checkpoint {
                offset: at,
                message: format!("parameter {i} is \"{got_name}\", expected \"{name}\""),
            });
        }
        let rank = r.read_u32("rank")? as usize;
        if rank != shape.len() {
            return Err(r.err(format!(
                "parameter \"{name}\" has rank {rank}, expected {}",
                shape.len()
            )));
        }
        for (d, &want) in shape.iter().enumerate() {
            let got = r.read_u64("dimension")? as usize;
            if got != want {
                return Err(r.err(format!(
                    "parameter \"{name}\" dim {d} is {got}, expected {want}"
                )));
            }
        }
        let count: usize = shape.iter().product();
        let at = r.pos;
        let raw = r.take(count * 8, "tensor values")?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tensor = Tensor::from_vec(shape, values).map_err(|e| Error::Checkpoint {
            offset: at,
            message: format!("parameter \"{name}\": {e}"),
        })?;
        *model.param_mut(i) = tensor;
    }
    if r.pos != bytes.len() {
        return Err(r.err(format!(
            "{} trailing bytes after the last parameter",
            bytes.len() - r.pos
        )));
    }
    Ok((model, meta))
}

pub fn save_checkpoint(model: &Model, meta: &CheckpointMeta, path: &Path) -> Result<()> {
    let bytes = checkpoint_to_bytes(model, meta)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, CheckpointMeta)> {
    let bytes = std::fs::read(path)?;
    checkpoint_from_bytes(&bytes)
}
