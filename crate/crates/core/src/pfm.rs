//! Portable FloatMap reading and writing.
//!
//! Only little-endian files (negative scale) are accepted. Rows are stored
//! bottom-to-top on disk and flipped to top-to-bottom in memory.

use std::fs;
use std::path::Path;

use glam::Vec3;

use crate::error::{Error, Result};
use crate::image::Image;

/// A decoded PFM payload: `Pf` (one channel) or `PF` (three channels).
#[derive(Clone, Debug, PartialEq)]
pub enum PfmImage {
    Mono(Image<f32>),
    Rgb(Image<Vec3>),
}

impl PfmImage {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            PfmImage::Mono(img) => img.dims(),
            PfmImage::Rgb(img) => img.dims(),
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            PfmImage::Mono(_) => 1,
            PfmImage::Rgb(_) => 3,
        }
    }
}

pub fn encode(image: &PfmImage) -> Vec<u8> {
    let (w, h) = image.dims();
    let magic = match image {
        PfmImage::Mono(_) => "Pf",
        PfmImage::Rgb(_) => "PF",
    };
    let header = format!("{magic}\n{w} {h}\n-1.0\n");
    let mut out = Vec::with_capacity(header.len() + w * h * image.channels() * 4);
    out.extend_from_slice(header.as_bytes());
    for y in (0..h).rev() {
        for x in 0..w {
            match image {
                PfmImage::Mono(img) => out.extend_from_slice(&img.get(x, y).to_le_bytes()),
                PfmImage::Rgb(img) => {
                    for c in img.get(x, y).to_array() {
                        out.extend_from_slice(&c.to_le_bytes());
                    }
                }
            }
        }
    }
    out
}

/// Decodes a PFM byte stream. `path` is only used in error messages.
pub fn decode(bytes: &[u8], path: &Path) -> Result<PfmImage> {
    let mut cursor = 0usize;
    let mut token = || -> Result<String> {
        while cursor < bytes.len() && bytes[cursor].is_ascii_whitespace() {
            cursor += 1;
        }
        let start = cursor;
        while cursor < bytes.len() && !bytes[cursor].is_ascii_whitespace() {
            cursor += 1;
        }
        if start == cursor {
            return Err(Error::pfm(path, "truncated header"));
        }
        let tok = std::str::from_utf8(&bytes[start..cursor])
            .map_err(|_| Error::pfm(path, "non-ASCII header"))?
            .to_owned();
        Ok(tok)
    };

    let channels = match token()?.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(Error::pfm(path, format!("bad magic `{other}`"))),
    };
    let width: usize = token()?
        .parse()
        .map_err(|_| Error::pfm(path, "bad width"))?;
    let height: usize = token()?
        .parse()
        .map_err(|_| Error::pfm(path, "bad height"))?;
    let scale: f32 = token()?
        .parse()
        .map_err(|_| Error::pfm(path, "bad scale"))?;
    if !(scale < 0.0) {
        return Err(Error::pfm(path, "unsupported endianness"));
    }
    // exactly one whitespace byte separates the header from the raster
    if cursor >= bytes.len() || !bytes[cursor].is_ascii_whitespace() {
        return Err(Error::pfm(path, "truncated header"));
    }
    cursor += 1;

    let expected = width * height * channels * 4;
    let raster = &bytes[cursor..];
    if raster.len() != expected {
        return Err(Error::pfm(
            path,
            format!("expected {expected} payload bytes, found {}", raster.len()),
        ));
    }
    let mut floats = raster
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));

    let image = if channels == 1 {
        let mut img = Image::new(width, height);
        for y in (0..height).rev() {
            for x in 0..width {
                img.set(x, y, floats.next().unwrap_or_default());
            }
        }
        PfmImage::Mono(img)
    } else {
        let mut img = Image::new(width, height);
        for y in (0..height).rev() {
            for x in 0..width {
                let r = floats.next().unwrap_or_default();
                let g = floats.next().unwrap_or_default();
                let b = floats.next().unwrap_or_default();
                img.set(x, y, Vec3::new(r, g, b));
            }
        }
        PfmImage::Rgb(img)
    };
    Ok(image)
}

pub fn write(path: &Path, image: &PfmImage) -> Result<()> {
    fs::write(path, encode(image)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<PfmImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
