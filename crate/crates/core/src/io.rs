//! File formats: PFM, 16-bit PNG depth, intrinsics text and RGB previews.

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::grid::{CameraIntrinsics, DepthGrid, DepthKind, NormalMap};
use crate::scalar::Real;

/// Contents of a PFM file. Samples are stored as `f32`.
#[derive(Clone, Debug, PartialEq)]
pub enum Pfm {
    /// `Pf`: one channel, read as depth.
    Gray(DepthGrid<f32>),
    /// `PF`: three channels, read as normals.
    Color(NormalMap<f32>),
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn token(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            self.pos = start;
            return self.fail(format!("expected {what}"));
        }
        match std::str::from_utf8(&self.bytes[start..self.pos]) {
            Ok(s) => Ok((start, s)),
            Err(_) => Err(Error::Parse {
                offset: start,
                message: format!("{what} is not ASCII"),
            }),
        }
    }
}

fn parse_at<F: std::str::FromStr>(offset: usize, s: &str, what: &str) -> Result<F> {
    s.parse().map_err(|_| Error::Parse {
        offset,
        message: format!("invalid {what} {s:?}"),
    })
}

/// Decodes a PFM byte stream.
pub fn decode_pfm(bytes: &[u8]) -> Result<Pfm> {
    let mut c = Cursor { bytes, pos: 0 };
    // Magic: exactly "Pf" or "PF".
    if bytes.first() != Some(&b'P') {
        return c.fail("expected 'P'");
    }
    c.pos = 1;
    let channels = match bytes.get(1) {
        Some(b'f') => 1,
        Some(b'F') => 3,
        Some(_) => return c.fail("channel tag must be 'f' or 'F'"),
        None => return c.fail("truncated header"),
    };
    c.pos = 2;
    if !bytes.get(2).is_some_and(|b| b.is_ascii_whitespace()) {
        return c.fail("expected whitespace after magic");
    }
    let (o, w) = c.token("width")?;
    let width: usize = parse_at(o, w, "width")?;
    let (o, h) = c.token("height")?;
    let height: usize = parse_at(o, h, "height")?;
    if width == 0 || height == 0 {
        return Err(Error::Parse {
            offset: o,
            message: "zero dimension".into(),
        });
    }
    let (o, s) = c.token("scale")?;
    let scale: f32 = parse_at(o, s, "scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Parse {
            offset: o,
            message: "scale must be finite and nonzero".into(),
        });
    }
    // Exactly one whitespace byte separates the header from the payload.
    if !bytes.get(c.pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return c.fail("expected whitespace after scale");
    }
    c.pos += 1;
    let little = scale < 0.0;
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::Parse {
            offset: o,
            message: "dimensions overflow".into(),
        })?;
    let payload = &bytes[c.pos..];
    if payload.len() < count * 4 {
        return Err(Error::Parse {
            offset: bytes.len(),
            message: format!("truncated payload: need {} bytes, have {}", count * 4, payload.len()),
        });
    }
    if payload.len() > count * 4 {
        return Err(Error::Parse {
            offset: c.pos + count * 4,
            message: "trailing bytes after payload".into(),
        });
    }
    let floats: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| {
            let b = [b[0], b[1], b[2], b[3]];
            if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();
    // Stored bottom row first.
    let row = width * channels;
    let flipped: Vec<f32> = floats.chunks_exact(row).rev().flatten().copied().collect();
    if channels == 1 {
        Ok(Pfm::Gray(DepthGrid::new(width, height, flipped, DepthKind::Depth)?))
    } else {
        let mut normals = Vec::with_capacity(width * height);
        let mut mask = Vec::with_capacity(width * height);
        for n in flipped.chunks_exact(3) {
            let n = [n[0], n[1], n[2]];
            let valid = n.iter().all(|x| x.is_finite());
            normals.push(if valid { n } else { [0.0; 3] });
            mask.push(valid);
        }
        Ok(Pfm::Color(NormalMap::from_parts(width, height, normals, mask)?))
    }
}

fn encode(width: usize, height: usize, channels: usize, samples: impl Fn(usize, &mut Vec<u8>)) -> Vec<u8> {
    let tag = if channels == 1 { "Pf" } else { "PF" };
    let mut out = format!("{tag}\n{width} {height}\n-1.0\n").into_bytes();
    out.reserve(width * height * channels * 4);
    for v in (0..height).rev() {
        for u in 0..width {
            samples(v * width + u, &mut out);
        }
    }
    out
}

/// Encodes a depth grid as a one-channel little-endian PFM; masked samples become NaN.
pub fn encode_pfm_depth<T: Real>(g: &DepthGrid<T>) -> Vec<u8> {
    encode(g.width(), g.height(), 1, |i, out| {
        let x = if g.mask()[i] {
            g.values()[i].to_f32().unwrap_or(f32::NAN)
        } else {
            f32::NAN
        };
        out.extend_from_slice(&x.to_le_bytes());
    })
}

/// Encodes a normal map as a three-channel little-endian PFM; masked pixels become NaN.
pub fn encode_pfm_normals<T: Real>(m: &NormalMap<T>) -> Vec<u8> {
    encode(m.width(), m.height(), 3, |i, out| {
        for c in 0..3 {
            let x = if m.mask()[i] {
                m.normals()[i][c].to_f32().unwrap_or(f32::NAN)
            } else {
                f32::NAN
            };
            out.extend_from_slice(&x.to_le_bytes());
        }
    })
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<Pfm> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm(&bytes)
}

pub fn write_pfm_depth<T: Real>(g: &DepthGrid<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pfm_depth(g)).map_err(|e| Error::io(path, e))
}

pub fn write_pfm_normals<T: Real>(m: &NormalMap<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pfm_normals(m)).map_err(|e| Error::io(path, e))
}

/// Depth from a 16-bit single-channel PNG: `raw * scale`, raw 0 masked.
pub fn read_depth_png16(path: impl AsRef<Path>, scale: f64) -> Result<DepthGrid<f64>> {
    let path = path.as_ref();
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidArgument(format!("depth scale must be positive, got {scale}")));
    }
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.into(),
        source,
    })?;
    let DynamicImage::ImageLuma16(buf) = img else {
        return Err(Error::Format(format!(
            "{}: expected 16-bit single-channel PNG, found {:?}",
            path.display(),
            img.color()
        )));
    };
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    let raw = buf.into_raw();
    let mask = raw.iter().map(|&r| r != 0).collect();
    let values = raw.iter().map(|&r| r as f64 * scale).collect();
    DepthGrid::from_parts(w, h, values, mask, DepthKind::Depth)
}

/// Writes depth as 16-bit PNG with `raw = round(depth / scale)`; masked pixels are 0.
pub fn write_depth_png16<T: Real>(g: &DepthGrid<T>, scale: f64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut raw = Vec::with_capacity(g.len());
    for (i, &x) in g.values().iter().enumerate() {
        if !g.mask()[i] {
            raw.push(0u16);
            continue;
        }
        let r = (x.as_f64() / scale).round();
        if !(1.0..=u16::MAX as f64).contains(&r) {
            return Err(Error::InvalidArgument(format!(
                "depth {} does not fit 16 bits at scale {scale}",
                x.as_f64()
            )));
        }
        raw.push(r as u16);
    }
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(g.width() as u32, g.height() as u32, raw)
            .ok_or_else(|| Error::DimensionMismatch("png buffer".into()))?;
    buf.save(path).map_err(|source| Error::Image {
        path: path.into(),
        source,
    })
}

/// Parses `fu fv cu cv` separated by whitespace.
pub fn parse_intrinsics(text: &str) -> Result<CameraIntrinsics<f64>> {
    let nums: Vec<f64> = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Format(format!("intrinsics: {t:?} is not a number")))
        })
        .collect::<Result<_>>()?;
    let [fu, fv, cu, cv] = nums[..] else {
        return Err(Error::Format(format!(
            "intrinsics: expected 4 numbers `fu fv cu cv`, found {}",
            nums.len()
        )));
    };
    CameraIntrinsics::new(fu, fv, cu, cv)
}

pub fn read_intrinsics(path: impl AsRef<Path>) -> Result<CameraIntrinsics<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_intrinsics(&text)
}

/// Maps each component to `round(255 (c + 1) / 2)`; masked pixels are black.
pub fn normal_to_rgb<T: Real>(m: &NormalMap<T>) -> RgbImage {
    let to8 = |c: T| (255.0 * (c.as_f64().clamp(-1.0, 1.0) + 1.0) / 2.0).round() as u8;
    RgbImage::from_fn(m.width() as u32, m.height() as u32, |u, v| {
        let i = v as usize * m.width() + u as usize;
        if m.mask()[i] {
            Rgb(m.normals()[i].map(to8))
        } else {
            Rgb([0, 0, 0])
        }
    })
}

pub fn write_rgb(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    img.save(path).map_err(|source| Error::Image {
        path: path.into(),
        source,
    })
}
