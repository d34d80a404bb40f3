//! Image domain types and windowed block extraction.
//!
//! Pixels are linearized row-major (`ℓ = row * width + col`, zero-based) and
//! samples are stored band-sequentially: component `r` occupies
//! `data[r * N .. (r + 1) * N]`. Every module shares this convention.

use crate::error::{ensure_len, Error, Result};
use crate::matrix::Mat;

/// An `R`-component image on a `width × height` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiComponentImage {
    width: usize,
    height: usize,
    components: usize,
    data: Vec<f64>,
}

impl MultiComponentImage {
    pub fn new(width: usize, height: usize, components: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || components == 0 {
            return Err(Error::Contract(format!(
                "image dimensions must be positive, got {width}x{height}x{components}"
            )));
        }
        ensure_len("image data", data.len(), width * height * components)?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("non-finite sample at flat index {i}")));
        }
        Ok(Self {
            width,
            height,
            components,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, components: usize) -> Self {
        Self {
            width,
            height,
            components,
            data: vec![0.0; width * height * components],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        components: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * components);
        for r in 0..components {
            for row in 0..height {
                for col in 0..width {
                    data.push(f(row, col, r));
                }
            }
        }
        Self {
            width,
            height,
            components,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn dims(&self) -> Dims {
        Dims {
            width: self.width,
            height: self.height,
            components: self.components,
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn band(&self, r: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[r * n..(r + 1) * n]
    }

    pub fn band_mut(&mut self, r: usize) -> &mut [f64] {
        let n = self.pixels();
        &mut self.data[r * n..(r + 1) * n]
    }

    pub fn get(&self, pixel: usize, r: usize) -> f64 {
        self.data[r * self.pixels() + pixel]
    }
}

/// Grid size shared by images, operators and tensor fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
    pub components: usize,
}

impl Dims {
    pub fn new(width: usize, height: usize, components: usize) -> Self {
        Self {
            width,
            height,
            components,
        }
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn len(&self) -> usize {
        self.pixels() * self.components
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Observed samples `z` together with the per-band kept-index lists.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradedObservation {
    pub dims: Dims,
    /// Side of the uniform blur applied before decimation (1 = no blur).
    pub blur: usize,
    /// One strictly increasing list of `K` pixel indices per band.
    pub masks: Vec<Vec<usize>>,
    /// `S · K` samples, band-sequential, in mask order.
    pub measurements: Vec<f64>,
}

impl DegradedObservation {
    pub fn new(dims: Dims, blur: usize, masks: Vec<Vec<usize>>, measurements: Vec<f64>) -> Result<Self> {
        validate_masks(&masks, dims)?;
        let kept = masks.first().map_or(0, Vec::len);
        ensure_len("measurements", measurements.len(), kept * masks.len())?;
        if blur == 0 {
            return Err(Error::Contract("blur size must be at least 1".into()));
        }
        Ok(Self {
            dims,
            blur,
            masks,
            measurements,
        })
    }

    /// Measurements per band (`K`).
    pub fn kept(&self) -> usize {
        self.masks.first().map_or(0, Vec::len)
    }

    /// Number of observed bands (`S`).
    pub fn bands(&self) -> usize {
        self.masks.len()
    }
}

pub(crate) fn validate_masks(masks: &[Vec<usize>], dims: Dims) -> Result<()> {
    if masks.len() != dims.components {
        return Err(Error::Dimension(format!(
            "expected one mask per component ({}), got {}",
            dims.components,
            masks.len()
        )));
    }
    let n = dims.pixels();
    let kept = masks.first().map_or(0, Vec::len);
    for (r, mask) in masks.iter().enumerate() {
        if mask.len() != kept {
            return Err(Error::Dimension(format!(
                "mask {r} keeps {} samples, mask 0 keeps {kept}",
                mask.len()
            )));
        }
        if mask.len() > n {
            return Err(Error::Contract(format!("mask {r} keeps more samples than pixels")));
        }
        if mask.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Contract(format!("mask {r} is not strictly increasing")));
        }
        if mask.last().is_some_and(|&i| i >= n) {
            return Err(Error::Contract(format!("mask {r} indexes past the last pixel")));
        }
    }
    Ok(())
}

/// Side and anchoring of the square window `W_ℓ`.
///
/// Odd sides are centred on the pixel; even sides put the pixel at the
/// top-left corner (for `Q = 2` this is the pixel with its right and bottom
/// neighbours).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    side: usize,
}

impl WindowSpec {
    pub fn new(side: usize) -> Result<Self> {
        if side < 2 {
            return Err(Error::Contract(format!("window side must be >= 2, got {side}")));
        }
        Ok(Self { side })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// First offset along each axis; the last is `start + side - 1`.
    pub fn start(&self) -> isize {
        if self.side % 2 == 1 {
            -((self.side as isize - 1) / 2)
        } else {
            0
        }
    }

    /// Window offsets `(dy, dx)` in raster order.
    pub fn offsets(&self) -> impl Iterator<Item = (isize, isize)> + '_ {
        let s = self.start();
        let q = self.side as isize;
        (s..s + q).flat_map(move |dy| (s..s + q).map(move |dx| (dy, dx)))
    }
}

/// Per-sample dynamic range `[lo, hi]` of the set `C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxConstraint {
    lo: f64,
    hi: f64,
}

impl BoxConstraint {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::Contract(format!("box requires lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    /// `[0, 255]`, the range images are normalized to.
    pub fn eight_bit() -> Self {
        Self { lo: 0.0, hi: 255.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

/// Fold an index into `[0, n)` by half-sample symmetric extension: the
/// sequence continues `n-1, n-2, …` past the end and `0, 1, …` before the
/// start (edge samples are repeated once).
pub fn mirror_index(i: isize, n: usize) -> usize {
    debug_assert!(n >= 1);
    let n = n as isize;
    if (0..n).contains(&i) {
        return i as usize;
    }
    let m = i.rem_euclid(2 * n);
    if m < n {
        m as usize
    } else {
        (2 * n - 1 - m) as usize
    }
}

/// Pixel reached from `pixel` by the offset `(dy, dx)`, mirrored at the borders.
pub fn shifted_pixel(pixel: usize, dy: isize, dx: isize, width: usize, height: usize) -> usize {
    let row = (pixel / width) as isize;
    let col = (pixel % width) as isize;
    mirror_index(row + dy, height) * width + mirror_index(col + dx, width)
}

/// The block `Y^(ℓ)`: a `Q² × R` matrix whose rows are the window samples
/// around `pixel` in raster order.
pub fn extract_window(x: &MultiComponentImage, pixel: usize, window: WindowSpec) -> Result<Mat> {
    let n = x.pixels();
    if pixel >= n {
        return Err(Error::Contract(format!("pixel {pixel} out of range (N = {n})")));
    }
    let r_count = x.components();
    let q2 = window.side() * window.side();
    let mut out = Mat::zeros(q2, r_count);
    for (j, (dy, dx)) in window.offsets().enumerate() {
        let src = shifted_pixel(pixel, dy, dx, x.width(), x.height());
        for r in 0..r_count {
            out[(j, r)] = x.get(src, r);
        }
    }
    Ok(out)
}
