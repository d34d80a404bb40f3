//! Image and observation files.
//!
//! * PPM: binary `P6`, three components, maxval ≤ 255. Samples are read as
//!   their integer values and written rounded and clamped to `[0, 255]`.
//! * BSQ-F32: the ASCII header `BSQF32 <width> <height> <components>`
//!   followed by a single whitespace byte and `width·height·components`
//!   little-endian `f32`, band after band, row-major within a band.
//! * Observation (`STOBS1`): 8-byte magic, then `u64` width, height,
//!   components, blur side and `K`; per band `K` strictly increasing `u32`
//!   pixel indices; then the `S·K` measurements as `f64`, band-sequential.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::binio::ByteReader;
use crate::error::{Error, Result};
use crate::image::{DegradedObservation, Dims, MultiComponentImage};

pub const BSQ_MAGIC: &str = "BSQF32";
pub const OBSERVATION_MAGIC: &[u8; 8] = b"STOBS1\0\0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Ppm,
    Bsq,
}

impl ImageFormat {
    /// `.ppm` is PPM; `.bsq` and `.f32` are BSQ-F32.
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        ext.parse()
            .map_err(|_| Error::Config(format!("cannot infer the image format of {}; set it explicitly", path.display())))
    }
}

impl fmt::Display for ImageFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImageFormat::Ppm => "ppm",
            ImageFormat::Bsq => "bsq",
        })
    }
}

impl FromStr for ImageFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ppm" => Ok(ImageFormat::Ppm),
            "bsq" | "f32" | "bsq-f32" => Ok(ImageFormat::Bsq),
            other => Err(Error::Config(format!("unknown image format {other:?} (expected ppm or bsq)"))),
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_image(path: &Path, format: ImageFormat) -> Result<MultiComponentImage> {
    let bytes = read_bytes(path)?;
    match format {
        ImageFormat::Ppm => decode_ppm(&bytes, path),
        ImageFormat::Bsq => decode_bsq(&bytes, path),
    }
}

pub fn write_image(path: &Path, image: &MultiComponentImage, format: ImageFormat) -> Result<()> {
    let bytes = match format {
        ImageFormat::Ppm => encode_ppm(image)?,
        ImageFormat::Bsq => encode_bsq(image),
    };
    write_bytes(path, &bytes)
}

fn header_dims(r: &mut ByteReader<'_>) -> Result<(usize, usize)> {
    let start = r.skip_to_token();
    let w = r.number("width")?;
    let h = r.number("height")?;
    if w == 0 || h == 0 {
        return Err(r.error_at(start, format!("empty image {w}×{h}")));
    }
    Ok((w, h))
}

/// `len` samples of `size` bytes each, checked against the remaining bytes
/// before allocating.
fn payload<'a>(r: &mut ByteReader<'a>, len: usize, size: usize) -> Result<&'a [u8]> {
    let need = len.checked_mul(size);
    match need {
        Some(n) if n <= r.remaining() => {
            let data = r.take(n, "pixel data")?;
            if r.remaining() != 0 {
                return Err(r.error(format!("{} trailing bytes after pixel data", r.remaining())));
            }
            Ok(data)
        }
        _ => Err(r.error(format!(
            "header announces {len} samples of {size} bytes, only {} bytes follow",
            r.remaining()
        ))),
    }
}

fn decode_ppm(bytes: &[u8], path: &Path) -> Result<MultiComponentImage> {
    let mut r = ByteReader::new(bytes, path);
    let magic = r.token("magic")?;
    if magic != "P6" {
        return Err(r.error_at(0, format!("expected binary PPM magic P6, found {magic:?}")));
    }
    let (w, h) = header_dims(&mut r)?;
    let at = r.skip_to_token();
    let maxval = r.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(r.error_at(at, format!("maxval {maxval} unsupported (1..=255)")));
    }
    r.single_whitespace("pixel data")?;
    let n = w.checked_mul(h).ok_or_else(|| r.error("image size overflows".into()))?;
    let data = payload(&mut r, n.saturating_mul(3), 1)?;
    // interleaved RGB to band-sequential
    let mut out = vec![0.0; n * 3];
    for (i, px) in data.chunks_exact(3).enumerate() {
        for (c, &v) in px.iter().enumerate() {
            out[c * n + i] = v as f64;
        }
    }
    MultiComponentImage::new(w, h, 3, out)
}

fn encode_ppm(image: &MultiComponentImage) -> Result<Vec<u8>> {
    if image.components() != 3 {
        return Err(Error::Config(format!(
            "PPM holds exactly 3 components, image has {}; use bsq",
            image.components()
        )));
    }
    let n = image.pixels();
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.reserve(n * 3);
    for i in 0..n {
        for c in 0..3 {
            out.push(image.get(i, c).round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(out)
}

fn decode_bsq(bytes: &[u8], path: &Path) -> Result<MultiComponentImage> {
    let mut r = ByteReader::new(bytes, path);
    let magic = r.token("magic")?;
    if magic != BSQ_MAGIC {
        return Err(r.error_at(0, format!("expected {BSQ_MAGIC} magic, found {magic:?}")));
    }
    let (w, h) = header_dims(&mut r)?;
    let at = r.skip_to_token();
    let c = r.number("component count")?;
    if c == 0 {
        return Err(r.error_at(at, "component count must be positive".into()));
    }
    r.single_whitespace("sample data")?;
    let len = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(c))
        .ok_or_else(|| r.error("image size overflows".into()))?;
    let data = payload(&mut r, len, 4)?;
    let values: Vec<f64> = data
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(r.error_at(bytes.len() - 4 * (len - i), "non-finite sample".into()));
    }
    MultiComponentImage::new(w, h, c, values)
}

fn encode_bsq(image: &MultiComponentImage) -> Vec<u8> {
    let mut out = format!("{BSQ_MAGIC} {} {} {}\n", image.width(), image.height(), image.components()).into_bytes();
    out.reserve(image.data().len() * 4);
    for &v in image.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn write_observation(path: &Path, obs: &DegradedObservation) -> Result<()> {
    let mut out = Vec::with_capacity(48 + obs.measurements.len() * 12);
    out.extend_from_slice(OBSERVATION_MAGIC);
    for v in [obs.dims.width, obs.dims.height, obs.dims.components, obs.blur, obs.kept()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for mask in &obs.masks {
        for &i in mask {
            out.extend_from_slice(&(i as u32).to_le_bytes());
        }
    }
    for &v in &obs.measurements {
        out.extend_from_slice(&v.to_le_bytes());
    }
    write_bytes(path, &out)
}

pub fn read_observation(path: &Path) -> Result<DegradedObservation> {
    let bytes = read_bytes(path)?;
    let mut r = ByteReader::new(&bytes, path);
    if r.take(8, "magic")? != OBSERVATION_MAGIC {
        return Err(r.error_at(0, "not an observation file (bad magic)".into()));
    }
    let mut field = |what: &str| r.u64(what).map(|v| v as usize);
    let (w, h, c, blur, k) = (
        field("width")?,
        field("height")?,
        field("components")?,
        field("blur")?,
        field("kept count")?,
    );
    let need = (c as u128) * (k as u128) * 12;
    if need > r.remaining() as u128 {
        return Err(r.error(format!("header announces {c}×{k} samples, file is too short")));
    }
    let mut masks = Vec::with_capacity(c);
    for _ in 0..c {
        masks.push((0..k).map(|_| r.u32("mask index").map(|i| i as usize)).collect::<Result<Vec<_>>>()?);
    }
    let measurements = (0..c * k).map(|_| r.f64("measurement")).collect::<Result<Vec<_>>>()?;
    if r.remaining() != 0 {
        return Err(r.error("trailing bytes after measurements".into()));
    }
    let end = r.at;
    DegradedObservation::new(Dims::new(w, h, c), blur, masks, measurements).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        offset: end as u64,
        message: e.to_string(),
    })
}
