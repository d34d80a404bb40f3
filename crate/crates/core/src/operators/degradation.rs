use rayon::prelude::*;

use super::LinearOperator;
use crate::error::{ensure_len, Error, Result};
use crate::image::{mirror_index, validate_masks, DegradedObservation, Dims, MultiComponentImage};

/// Block-diagonal degradation: each band is blurred by a uniform `b × b`
/// kernel (weights `1/b²`, mirrored borders) and then decimated to the `K`
/// pixels listed in its mask.
#[derive(Debug, Clone)]
pub struct DegradationOperator {
    dims: Dims,
    blur: usize,
    masks: Vec<Vec<usize>>,
}

impl DegradationOperator {
    pub fn new(dims: Dims, blur: usize, masks: Vec<Vec<usize>>) -> Result<Self> {
        if blur == 0 {
            return Err(Error::Contract("blur size must be at least 1".into()));
        }
        validate_masks(&masks, dims)?;
        Ok(Self { dims, blur, masks })
    }

    /// No blur, every pixel kept.
    pub fn identity(dims: Dims) -> Self {
        let full: Vec<usize> = (0..dims.pixels()).collect();
        Self {
            dims,
            blur: 1,
            masks: vec![full; dims.components],
        }
    }

    pub fn for_observation(obs: &DegradedObservation) -> Result<Self> {
        Self::new(obs.dims, obs.blur, obs.masks.clone())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn blur(&self) -> usize {
        self.blur
    }

    pub fn masks(&self) -> &[Vec<usize>] {
        &self.masks
    }

    /// Samples kept per band (`K`).
    pub fn kept(&self) -> usize {
        self.masks.first().map_or(0, Vec::len)
    }

    pub fn apply(&self, x: &MultiComponentImage) -> Result<Vec<f64>> {
        if x.dims() != self.dims {
            return Err(Error::Dimension(format!(
                "image is {:?}, operator expects {:?}",
                x.dims(),
                self.dims
            )));
        }
        Ok(self.apply_vec(x.data()))
    }

    pub fn adjoint(&self, y: &[f64]) -> Result<MultiComponentImage> {
        ensure_len("observation vector", y.len(), self.output_len())?;
        let data = self.adjoint_vec(y);
        Ok(MultiComponentImage::new(self.dims.width, self.dims.height, self.dims.components, data)?)
    }

    fn kernel_range(&self) -> (isize, isize) {
        let lo = -((self.blur as isize - 1) / 2);
        (lo, lo + self.blur as isize - 1)
    }
}

impl LinearOperator for DegradationOperator {
    fn input_len(&self) -> usize {
        self.dims.len()
    }

    fn output_len(&self) -> usize {
        self.kept() * self.dims.components
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.input_len());
        debug_assert_eq!(out.len(), self.output_len());
        let n = self.dims.pixels();
        let k = self.kept();
        if k == 0 {
            return;
        }
        let (w, h) = (self.dims.width, self.dims.height);
        let range = self.kernel_range();
        out.par_chunks_mut(k)
            .zip(x.par_chunks(n))
            .zip(self.masks.par_iter())
            .for_each(|((dst, band), mask)| {
                if self.blur == 1 {
                    for (d, &i) in dst.iter_mut().zip(mask) {
                        *d = band[i];
                    }
                    return;
                }
                let mut tmp = vec![0.0; n];
                let mut blurred = vec![0.0; n];
                blur_rows(band, &mut tmp, w, h, range);
                blur_cols(&tmp, &mut blurred, w, h, range);
                for (d, &i) in dst.iter_mut().zip(mask) {
                    *d = blurred[i];
                }
            });
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.output_len());
        debug_assert_eq!(out.len(), self.input_len());
        let n = self.dims.pixels();
        let k = self.kept();
        let (w, h) = (self.dims.width, self.dims.height);
        let range = self.kernel_range();
        out.par_chunks_mut(n)
            .zip(self.masks.par_iter())
            .enumerate()
            .for_each(|(r, (dst, mask))| {
                let ys = &y[r * k..(r + 1) * k];
                if self.blur == 1 {
                    dst.fill(0.0);
                    for (&v, &i) in ys.iter().zip(mask) {
                        dst[i] = v;
                    }
                    return;
                }
                let mut full = vec![0.0; n];
                for (&v, &i) in ys.iter().zip(mask) {
                    full[i] = v;
                }
                let mut tmp = vec![0.0; n];
                blur_cols_adjoint(&full, &mut tmp, w, h, range);
                blur_rows_adjoint(&tmp, dst, w, h, range);
            });
    }
}

fn blur_rows(src: &[f64], dst: &mut [f64], w: usize, h: usize, (lo, hi): (isize, isize)) {
    let scale = 1.0 / (hi - lo + 1) as f64;
    for row in 0..h {
        let s = &src[row * w..(row + 1) * w];
        for (col, d) in dst[row * w..(row + 1) * w].iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in lo..=hi {
                acc += s[mirror_index(col as isize + k, w)];
            }
            *d = acc * scale;
        }
    }
}

fn blur_cols(src: &[f64], dst: &mut [f64], w: usize, h: usize, (lo, hi): (isize, isize)) {
    let scale = 1.0 / (hi - lo + 1) as f64;
    for row in 0..h {
        let d = &mut dst[row * w..(row + 1) * w];
        d.fill(0.0);
        for k in lo..=hi {
            let s = &src[mirror_index(row as isize + k, h) * w..][..w];
            for (a, b) in d.iter_mut().zip(s) {
                *a += b;
            }
        }
        for a in d.iter_mut() {
            *a *= scale;
        }
    }
}

fn blur_rows_adjoint(src: &[f64], dst: &mut [f64], w: usize, h: usize, (lo, hi): (isize, isize)) {
    let scale = 1.0 / (hi - lo + 1) as f64;
    dst.fill(0.0);
    for row in 0..h {
        let s = &src[row * w..(row + 1) * w];
        let d = &mut dst[row * w..(row + 1) * w];
        for (col, &v) in s.iter().enumerate() {
            let v = v * scale;
            for k in lo..=hi {
                d[mirror_index(col as isize + k, w)] += v;
            }
        }
    }
}

fn blur_cols_adjoint(src: &[f64], dst: &mut [f64], w: usize, h: usize, (lo, hi): (isize, isize)) {
    let scale = 1.0 / (hi - lo + 1) as f64;
    dst.fill(0.0);
    for row in 0..h {
        let s = &src[row * w..(row + 1) * w];
        for k in lo..=hi {
            let target = mirror_index(row as isize + k, h);
            let d = &mut dst[target * w..(target + 1) * w];
            for (a, b) in d.iter_mut().zip(s) {
                *a += b * scale;
            }
        }
    }
}
