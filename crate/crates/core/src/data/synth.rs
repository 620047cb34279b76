//! Seeded synthetic gesture images: five analytic shape classes rendered with
//! per-sample translation/rotation jitter, brightness scaling, background
//! clutter blobs, and Gaussian pixel noise. Everything derives from one seed,
//! and samples are quantized to the 8-bit grid so exporting to PGM and
//! reloading reproduces them bit-for-bit.

use crate::data::dataset::{Dataset, Provenance, Sample};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Jitter and noise constants; fixed so golden renders stay stable.
const TRANSLATE_FRAC: f64 = 0.1; // +-10% of the image extent
const ROTATE_DEG: f64 = 10.0; // +-10 degrees
const BRIGHTNESS_LO: f64 = 0.6;
const BRIGHTNESS_HI: f64 = 1.0;
const NOISE_SIGMA: f64 = 0.02; // post-normalization
const MAX_CLUTTER_BLOBS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    /// Solid bar rotated to the given angle in degrees.
    BarAtAngle(i32),
    /// Ring.
    Circle,
    /// Axis-aligned plus sign.
    Cross,
    /// Two arms meeting at the bottom center.
    Vee,
    /// 3x3 grid of dots.
    DotGrid,
}

impl ShapeKind {
    /// Stable class name used for dataset directories and labels.
    pub fn name(&self) -> String {
        match self {
            ShapeKind::BarAtAngle(deg) => format!("bar{deg}"),
            ShapeKind::Circle => "circle".into(),
            ShapeKind::Cross => "cross".into(),
            ShapeKind::Vee => "vee".into(),
            ShapeKind::DotGrid => "dotgrid".into(),
        }
    }

    pub fn parse(s: &str) -> Result<ShapeKind> {
        match s {
            "circle" => Ok(ShapeKind::Circle),
            "cross" => Ok(ShapeKind::Cross),
            "vee" => Ok(ShapeKind::Vee),
            "dotgrid" => Ok(ShapeKind::DotGrid),
            _ => {
                if let Some(deg) = s.strip_prefix("bar") {
                    let deg = deg.parse().map_err(|_| {
                        Error::Config(format!("bad bar angle in shape name \"{s}\""))
                    })?;
                    Ok(ShapeKind::BarAtAngle(deg))
                } else {
                    Err(Error::Config(format!(
                        "unknown shape \"{s}\" (expected bar<deg>, circle, cross, vee, dotgrid)"
                    )))
                }
            }
        }
    }

    /// Signed distance to the shape boundary in normalized [-1, 1]^2
    /// coordinates (negative inside).
    fn distance(&self, x: f64, y: f64) -> f64 {
        match self {
            ShapeKind::BarAtAngle(deg) => {
                let a = (*deg as f64).to_radians();
                let (sin, cos) = a.sin_cos();
                let u = x * cos + y * sin;
                let v = -x * sin + y * cos;
                (u.abs() - 0.65).max(v.abs() - 0.14)
            }
            ShapeKind::Circle => ((x * x + y * y).sqrt() - 0.55).abs() - 0.12,
            ShapeKind::Cross => {
                let horizontal = (x.abs() - 0.65).max(y.abs() - 0.14);
                let vertical = (x.abs() - 0.14).max(y.abs() - 0.65);
                horizontal.min(vertical)
            }
            ShapeKind::Vee => {
                let apex = (0.0, 0.6);
                let left = segment_distance(x, y, -0.55, -0.6, apex.0, apex.1);
                let right = segment_distance(x, y, 0.55, -0.6, apex.0, apex.1);
                left.min(right) - 0.12
            }
            ShapeKind::DotGrid => {
                let mut best = f64::INFINITY;
                for cy in [-0.55, 0.0, 0.55] {
                    for cx in [-0.55, 0.0, 0.55] {
                        let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() - 0.14;
                        best = best.min(d);
                    }
                }
                best
            }
        }
    }
}

fn segment_distance(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0);
    let (cx, cy) = (ax + t * dx, ay + t * dy);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

struct SampleParams {
    dx: f64,
    dy: f64,
    rotation: f64,
    brightness: f64,
    blobs: Vec<Blob>,
}

struct Blob {
    cx: f64,
    cy: f64,
    radius: f64,
    intensity: f64,
}

fn render(kind: ShapeKind, size: usize, params: &SampleParams, noise: Option<&mut Rng>) -> Tensor {
    let edge = 2.0 / size as f64; // ~1 pixel of smoothing at the boundary
    let (sin, cos) = params.rotation.sin_cos();
    let mut data = Vec::with_capacity(size * size);
    for i in 0..size {
        let y = (i as f64 + 0.5) / size as f64 * 2.0 - 1.0;
        for j in 0..size {
            let x = (j as f64 + 0.5) / size as f64 * 2.0 - 1.0;
            // Undo the sample's translation and rotation.
            let (tx, ty) = (x - params.dx, y - params.dy);
            let (sx, sy) = (tx * cos + ty * sin, -tx * sin + ty * cos);
            let d = kind.distance(sx, sy);
            let shape = (1.0 - d / edge).clamp(0.0, 1.0);
            let mut v = shape * params.brightness;
            for blob in &params.blobs {
                let r2 = (x - blob.cx).powi(2) + (y - blob.cy).powi(2);
                let falloff = (1.0 - r2 / (blob.radius * blob.radius)).max(0.0);
                v += blob.intensity * falloff;
            }
            data.push(v);
        }
    }
    if let Some(rng) = noise {
        for v in &mut data {
            *v += NOISE_SIGMA * rng.normal();
        }
    }
    // Clamp and snap to the 8-bit grid so PGM export round-trips exactly.
    for v in &mut data {
        *v = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0;
    }
    Tensor::from_raw(vec![1, size, size], data)
}

/// Canonical clean render of a shape: no jitter, no clutter, no noise, full
/// brightness. This is what the golden-file tests pin down.
pub fn render_template(kind: ShapeKind, size: usize) -> Tensor {
    let params = SampleParams {
        dx: 0.0,
        dy: 0.0,
        rotation: 0.0,
        brightness: 1.0,
        blobs: Vec::new(),
    };
    render(kind, size, &params, None)
}

/// Generates a labeled dataset of `n_per_class` samples for each shape class.
/// `clutter` in [0, 1] scales the number and intensity of background blobs.
/// The same (seed, arguments) always produce a byte-identical dataset.
pub fn synth_gestures(
    seed: u64,
    classes: &[ShapeKind],
    n_per_class: usize,
    size: usize,
    clutter: f64,
) -> Result<Dataset> {
    if classes.len() < 2 {
        return Err(Error::Config(format!(
            "need at least 2 gesture classes, got {}",
            classes.len()
        )));
    }
    let names: Vec<String> = classes.iter().map(|k| k.name()).collect();
    for (i, name) in names.iter().enumerate() {
        if names[..i].contains(name) {
            return Err(Error::Config(format!("duplicate gesture class \"{name}\"")));
        }
    }
    if n_per_class == 0 {
        return Err(Error::Config("n_per_class must be >= 1".into()));
    }
    if size == 0 {
        return Err(Error::Config("image size must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&clutter) {
        return Err(Error::Config(format!(
            "clutter level must lie in [0, 1], got {clutter}"
        )));
    }
    let n_blobs = (clutter * MAX_CLUTTER_BLOBS).round() as usize;
    let mut rng = Rng::new(seed);
    let mut samples = Vec::with_capacity(classes.len() * n_per_class);
    for (label, kind) in classes.iter().enumerate() {
        for i in 0..n_per_class {
            let params = SampleParams {
                dx: rng.uniform(-TRANSLATE_FRAC, TRANSLATE_FRAC) * 2.0,
                dy: rng.uniform(-TRANSLATE_FRAC, TRANSLATE_FRAC) * 2.0,
                rotation: rng.uniform(-ROTATE_DEG, ROTATE_DEG).to_radians(),
                brightness: rng.uniform(BRIGHTNESS_LO, BRIGHTNESS_HI),
                blobs: (0..n_blobs)
                    .map(|_| Blob {
                        cx: rng.uniform(-1.0, 1.0),
                        cy: rng.uniform(-1.0, 1.0),
                        radius: rng.uniform(0.15, 0.45),
                        intensity: rng.uniform(0.05, 0.05 + 0.15 * clutter),
                    })
                    .collect(),
            };
            let image = render(*kind, size, &params, Some(&mut rng));
            samples.push(Sample {
                image,
                label,
                source_id: format!("{}_{i:04}", names[label]),
            });
        }
    }
    Dataset::new(names, samples, Provenance::Synthetic { seed })
}
