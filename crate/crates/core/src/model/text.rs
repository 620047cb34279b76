//! Canonical textual form of `ModelConfig` so architectures are reproducible
//! from files. Writing then parsing then writing again yields identical bytes.
//!
//! ```text
//! input = 1x32x32
//! classes = 4
//! seed = 7
//! layer = conv out=8 kernel=3 stride=1 pad=1
//! layer = relu
//! layer = pool kind=max window=2 stride=2
//! layer = flatten
//! layer = dense units=4
//! layer = softmax
//! ```

use super::{LayerSpec, ModelConfig};
use crate::error::{Error, Result};
use crate::layers::PoolKind;
use std::fmt;

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
                padding,
            } => write!(
                f,
                "conv out={out_channels} kernel={kernel} stride={stride} pad={padding}"
            ),
            LayerSpec::Relu => write!(f, "relu"),
            LayerSpec::Pool {
                kind,
                window,
                stride,
            } => {
                let kind = match kind {
                    PoolKind::Max => "max",
                    PoolKind::Average => "avg",
                };
                write!(f, "pool kind={kind} window={window} stride={stride}")
            }
            LayerSpec::Flatten => write!(f, "flatten"),
            LayerSpec::Dense { units } => write!(f, "dense units={units}"),
            LayerSpec::Softmax => write!(f, "softmax"),
            LayerSpec::ResidualBlock => write!(f, "residual"),
            LayerSpec::DenseBlock { depth, growth } => {
                write!(f, "dense_block depth={depth} growth={growth}")
            }
        }
    }
}

fn parse_kv<'a>(token: &'a str, line: &str) -> Result<(&'a str, &'a str)> {
    token.split_once('=').ok_or_else(|| {
        Error::Config(format!("expected key=value, got \"{token}\" in \"{line}\""))
    })
}

fn parse_usize(value: &str, key: &str, line: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad integer for {key} in \"{line}\"")))
}

type LayerArgs<'a> = std::collections::BTreeMap<&'a str, &'a str>;

fn take_usize(args: &mut LayerArgs, kind: &str, key: &str, line: &str) -> Result<usize> {
    let v = args
        .remove(key)
        .ok_or_else(|| Error::Config(format!("layer {kind} missing {key} in \"{line}\"")))?;
    parse_usize(v, key, line)
}

fn parse_layer(body: &str, line: &str) -> Result<LayerSpec> {
    let mut tokens = body.split_whitespace();
    let kind = tokens
        .next()
        .ok_or_else(|| Error::Config(format!("empty layer spec in \"{line}\"")))?;
    let mut args = LayerArgs::new();
    for token in tokens {
        let (k, v) = parse_kv(token, line)?;
        if args.insert(k, v).is_some() {
            return Err(Error::Config(format!("duplicate {k} in \"{line}\"")));
        }
    }
    let spec = match kind {
        "conv" => LayerSpec::Conv {
            out_channels: take_usize(&mut args, kind, "out", line)?,
            kernel: take_usize(&mut args, kind, "kernel", line)?,
            stride: take_usize(&mut args, kind, "stride", line)?,
            padding: take_usize(&mut args, kind, "pad", line)?,
        },
        "relu" => LayerSpec::Relu,
        "pool" => {
            let kind_str = args.remove("kind").ok_or_else(|| {
                Error::Config(format!("layer pool missing kind in \"{line}\""))
            })?;
            let pool_kind = match kind_str {
                "max" => PoolKind::Max,
                "avg" => PoolKind::Average,
                other => {
                    return Err(Error::Config(format!(
                        "unknown pool kind \"{other}\" in \"{line}\""
                    )))
                }
            };
            LayerSpec::Pool {
                kind: pool_kind,
                window: take_usize(&mut args, kind, "window", line)?,
                stride: take_usize(&mut args, kind, "stride", line)?,
            }
        }
        "flatten" => LayerSpec::Flatten,
        "dense" => LayerSpec::Dense {
            units: take_usize(&mut args, kind, "units", line)?,
        },
        "softmax" => LayerSpec::Softmax,
        "residual" => LayerSpec::ResidualBlock,
        "dense_block" => LayerSpec::DenseBlock {
            depth: take_usize(&mut args, kind, "depth", line)?,
            growth: take_usize(&mut args, kind, "growth", line)?,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown layer kind \"{other}\" in \"{line}\""
            )))
        }
    };
    if let Some((k, _)) = args.into_iter().next() {
        return Err(Error::Config(format!(
            "unknown argument \"{k}\" for layer {kind} in \"{line}\""
        )));
    }
    Ok(spec)
}

impl ModelConfig {
    pub fn to_text(&self) -> String {
        let [c, h, w] = self.input_shape;
        let mut out = format!(
            "input = {c}x{h}x{w}\nclasses = {}\nseed = {}\n",
            self.num_classes, self.init_seed
        );
        for layer in &self.layers {
            out.push_str(&format!("layer = {layer}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<ModelConfig> {
        let mut input_shape = None;
        let mut num_classes = None;
        let mut seed = None;
        let mut layers = Vec::new();
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key = value, got \"{line}\"")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "input" => {
                    let dims: Vec<&str> = value.split('x').collect();
                    if dims.len() != 3 {
                        return Err(Error::Config(format!(
                            "input must be CxHxW, got \"{value}\""
                        )));
                    }
                    input_shape = Some([
                        parse_usize(dims[0], "input channels", line)?,
                        parse_usize(dims[1], "input height", line)?,
                        parse_usize(dims[2], "input width", line)?,
                    ]);
                }
                "classes" => num_classes = Some(parse_usize(value, "classes", line)?),
                "seed" => {
                    seed = Some(value.parse::<u64>().map_err(|_| {
                        Error::Config(format!("bad integer for seed in \"{line}\""))
                    })?)
                }
                "layer" => layers.push(parse_layer(value, line)?),
                other => {
                    return Err(Error::Config(format!(
                        "unknown model config key \"{other}\""
                    )))
                }
            }
        }
        Ok(ModelConfig {
            input_shape: input_shape
                .ok_or_else(|| Error::Config("model config missing \"input\"".into()))?,
            num_classes: num_classes
                .ok_or_else(|| Error::Config("model config missing \"classes\"".into()))?,
            layers,
            init_seed: seed.ok_or_else(|| Error::Config("model config missing \"seed\"".into()))?,
        })
    }
}
