//! Binary PGM (P5) / PPM (P6) decoding and the preprocessing steps that turn
//! a raw image into a model input tensor.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// 8-bit image, row-major, interleaved channels (1 = gray, 3 = RGB).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<ImageBuffer> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidShape(format!(
                "image dimensions must be >= 1, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidShape(format!(
                "image channels must be 1 or 3, got {channels}"
            )));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::InvalidShape(format!(
                "{width}x{height}x{channels} image needs {} bytes, got {}",
                width * height * channels,
                pixels.len()
            )));
        }
        Ok(ImageBuffer {
            width,
            height,
            channels,
            pixels,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Decode {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Result<u8> {
        let b = *self
            .bytes
            .get(self.pos)
            .ok_or_else(|| self.err("unexpected end of file"))?;
        self.pos += 1;
        Ok(b)
    }

    /// Skips PNM whitespace, treating `#` comments as whitespace up to the
    /// end of their line.
    fn skip_whitespace_and_comments(&mut self) -> Result<()> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b' ' | b'\t' | b'\r' | b'\n') => self.pos += 1,
                Some(b'#') => {
                    while !matches!(self.bytes.get(self.pos), None | Some(b'\n')) {
                        self.pos += 1;
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn read_uint(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments()?;
        let start = self.pos;
        let mut value: usize = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as usize))
                .ok_or_else(|| self.err(format!("{what} is out of range")))?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err(format!("expected {what}")));
        }
        Ok(value)
    }
}

/// Decodes a binary PGM (P5) or PPM (P6) file with maxval 255.
pub fn decode_image(bytes: &[u8]) -> Result<ImageBuffer> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = [cur.next()?, cur.next()?];
    let channels = match &magic {
        b"P5" => 1,
        b"P6" => 3,
        _ => {
            return Err(Error::Decode {
                offset: 0,
                message: format!(
                    "unsupported magic {:?} (only binary P5/P6)",
                    String::from_utf8_lossy(&magic)
                ),
            })
        }
    };
    let width = cur.read_uint("width")?;
    let height = cur.read_uint("height")?;
    let maxval_at = {
        cur.skip_whitespace_and_comments()?;
        cur.pos
    };
    let maxval = cur.read_uint("maxval")?;
    if maxval != 255 {
        return Err(Error::Decode {
            offset: maxval_at,
            message: format!("unsupported maxval {maxval} (must be 255)"),
        });
    }
    if width == 0 || height == 0 {
        return Err(cur.err(format!("invalid dimensions {width}x{height}")));
    }
    // Exactly one whitespace byte separates the header from the payload.
    match cur.next()? {
        b' ' | b'\t' | b'\r' | b'\n' => {}
        other => {
            return Err(Error::Decode {
                offset: cur.pos - 1,
                message: format!("expected whitespace before payload, got byte {other:#04x}"),
            })
        }
    }
    let expected = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| cur.err("dimensions overflow"))?;
    let available = bytes.len() - cur.pos;
    if available < expected {
        return Err(Error::Decode {
            offset: bytes.len(),
            message: format!("truncated payload: expected {expected} bytes, got {available}"),
        });
    }
    ImageBuffer::new(
        width,
        height,
        channels,
        bytes[cur.pos..cur.pos + expected].to_vec(),
    )
}

/// Encodes to binary PGM (1 channel) or PPM (3 channels), maxval 255.
pub fn encode_image(img: &ImageBuffer) -> Vec<u8> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// BT.601 luma: gray = round(0.299 R + 0.587 G + 0.114 B). Identity on
/// single-channel input.
pub fn to_grayscale(img: &ImageBuffer) -> ImageBuffer {
    if img.channels == 1 {
        return img.clone();
    }
    let pixels = img
        .pixels
        .chunks_exact(3)
        .map(|px| {
            let gray = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
            gray.round().min(255.0) as u8
        })
        .collect();
    ImageBuffer {
        width: img.width,
        height: img.height,
        channels: 1,
        pixels,
    }
}

/// Bilinear resize to `size x size` with pixel-center sampling: source
/// coordinate = (i + 0.5) * scale - 0.5, clamped to the source grid.
pub fn resize_bilinear(img: &ImageBuffer, size: usize) -> Result<ImageBuffer> {
    if size == 0 {
        return Err(Error::InvalidShape("resize target must be >= 1".into()));
    }
    if img.width == size && img.height == size {
        return Ok(img.clone());
    }
    let ch = img.channels;
    let scale_y = img.height as f64 / size as f64;
    let scale_x = img.width as f64 / size as f64;
    let mut pixels = Vec::with_capacity(size * size * ch);
    for i in 0..size {
        let sy = ((i as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (img.height - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(img.height - 1);
        let fy = sy - y0 as f64;
        for j in 0..size {
            let sx = ((j as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (img.width - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(img.width - 1);
            let fx = sx - x0 as f64;
            for c in 0..ch {
                let at = |y: usize, x: usize| img.pixels[(y * img.width + x) * ch + c] as f64;
                let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                pixels.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    ImageBuffer::new(size, size, ch, pixels)
}

/// Grayscale image to `[1, H, W]` tensor with values pixel / 255.
pub fn normalize(img: &ImageBuffer) -> Result<Tensor> {
    if img.channels != 1 {
        return Err(Error::InvalidShape(format!(
            "normalize expects a single-channel image, got {} channels",
            img.channels
        )));
    }
    let data = img.pixels.iter().map(|&p| p as f64 / 255.0).collect();
    Ok(Tensor::from_raw(vec![1, img.height, img.width], data))
}

/// `[1, H, W]` tensor in [0, 1] back to an 8-bit grayscale image
/// (round(v * 255), clamped).
pub fn denormalize(t: &Tensor) -> Result<ImageBuffer> {
    if t.rank() != 3 || t.dim(0) != 1 {
        return Err(Error::InvalidShape(format!(
            "denormalize expects a [1, H, W] tensor, got {:?}",
            t.shape()
        )));
    }
    let pixels = t
        .data()
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    ImageBuffer::new(t.dim(2), t.dim(1), 1, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_p5_hand_crafted() {
        let bytes = b"P5\n2 2\n255\n\x00\xff\x80\x40";
        let img = decode_image(bytes).unwrap();
        assert_eq!((img.width, img.height, img.channels), (2, 2, 1));
        assert_eq!(img.pixels, vec![0, 255, 128, 64]);
    }

    #[test]
    fn decode_p6_hand_crafted() {
        let bytes = b"P6\n1 1\n255\n\xff\x00\x00";
        let img = decode_image(bytes).unwrap();
        assert_eq!((img.width, img.height, img.channels), (1, 1, 3));
        assert_eq!(img.pixels, vec![255, 0, 0]);
    }

    #[test]
    fn decode_handles_comments() {
        let bytes = b"P5\n# a comment\n2 1\n# another\n255\n\x01\x02";
        let img = decode_image(bytes).unwrap();
        assert_eq!(img.pixels, vec![1, 2]);
    }

    #[test]
    fn decode_truncated_payload_reports_offset() {
        let bytes = b"P5\n2 2\n255\n\x00\xff";
        match decode_image(bytes) {
            Err(Error::Decode { offset, message }) => {
                assert_eq!(offset, bytes.len());
                assert!(message.contains("truncated"), "{message}");
            }
            other => panic!("expected decode error, got {other:?}"),
        }
    }

    #[test]
    fn decode_rejects_bad_magic_and_maxval() {
        assert!(matches!(
            decode_image(b"XXXX"),
            Err(Error::Decode { offset: 0, .. })
        ));
        assert!(matches!(
            decode_image(b"P5\n2 2\n65535\n"),
            Err(Error::Decode { .. })
        ));
    }

    #[test]
    fn encode_decode_roundtrip() {
        let img = ImageBuffer::new(3, 2, 1, vec![0, 50, 100, 150, 200, 250]).unwrap();
        assert_eq!(decode_image(&encode_image(&img)).unwrap(), img);
        let rgb = ImageBuffer::new(1, 2, 3, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(decode_image(&encode_image(&rgb)).unwrap(), rgb);
    }

    #[test]
    fn grayscale_white_and_red() {
        let white = ImageBuffer::new(1, 1, 3, vec![255, 255, 255]).unwrap();
        assert_eq!(to_grayscale(&white).pixels, vec![255]);
        let red = ImageBuffer::new(1, 1, 3, vec![255, 0, 0]).unwrap();
        // 0.299 * 255 = 76.245 -> 76
        assert_eq!(to_grayscale(&red).pixels, vec![76]);
    }

    #[test]
    fn grayscale_is_identity_on_gray() {
        let gray = ImageBuffer::new(2, 1, 1, vec![4, 200]).unwrap();
        assert_eq!(to_grayscale(&gray), gray);
    }

    #[test]
    fn resize_constant_image_stays_constant() {
        let img = ImageBuffer::new(3, 3, 1, vec![77; 9]).unwrap();
        for size in [1, 2, 5, 8] {
            let out = resize_bilinear(&img, size).unwrap();
            assert!(out.pixels.iter().all(|&p| p == 77));
        }
    }

    #[test]
    fn resize_same_size_is_identity() {
        let img = ImageBuffer::new(4, 4, 1, (0..16).map(|v| v as u8 * 16).collect::<Vec<_>>())
            .unwrap();
        assert_eq!(resize_bilinear(&img, 4).unwrap(), img);
    }

    #[test]
    fn resize_2x2_checker_to_1x1_averages() {
        let img = ImageBuffer::new(2, 2, 1, vec![0, 100, 100, 0]).unwrap();
        let out = resize_bilinear(&img, 1).unwrap();
        assert_eq!(out.pixels, vec![50]);
    }

    #[test]
    fn normalize_endpoints_and_midpoint() {
        let img = ImageBuffer::new(3, 1, 1, vec![255, 0, 128]).unwrap();
        let t = normalize(&img).unwrap();
        assert_eq!(t.shape(), &[1, 1, 3]);
        assert_eq!(t.data()[0], 1.0);
        assert_eq!(t.data()[1], 0.0);
        assert!((t.data()[2] - 128.0 / 255.0).abs() < 1e-15);
    }

    #[test]
    fn normalize_denormalize_within_quantization() {
        let t = Tensor::seeded_uniform(&[1, 4, 4], 0.0, 1.0, 50).unwrap();
        let back = normalize(&denormalize(&t).unwrap()).unwrap();
        for (a, b) in t.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 1.0 / 510.0 + 1e-12);
        }
    }

    #[test]
    fn preprocessing_chain_is_deterministic() {
        let bytes = b"P6\n2 2\n255\nABCDEFGHIJKL";
        let run = || {
            let img = decode_image(bytes).unwrap();
            let gray = to_grayscale(&img);
            let small = resize_bilinear(&gray, 2).unwrap();
            normalize(&small).unwrap()
        };
        assert!(run().bits_eq(&run()));
    }
}
