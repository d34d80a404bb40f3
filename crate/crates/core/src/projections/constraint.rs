use rayon::prelude::*;

use super::matrix_epi::{project_epi_block, Schatten};
use super::scalar::{project_epi_abs, project_epi_l2, project_epi_linf_signed, project_halfspace, project_l1_ball};
use super::svd::{thin_svd, SvdResult};
use crate::error::{ensure_len, Error, Result};
use crate::image::BoxConstraint;
use crate::matrix::{norm2, Mat};
use crate::operators::tensor::split_ragged_mut;
use crate::operators::{Coupling, TensorField};

/// The constraint `Σ_ℓ τ_ℓ ‖X^(ℓ)‖_p ≤ η` together with the box `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    norm: Schatten,
    eta: f64,
    tau: Option<Vec<f64>>,
    bounds: BoxConstraint,
}

impl ConstraintSpec {
    /// Unit weights `τ_ℓ = 1`.
    pub fn new(norm: Schatten, eta: f64, bounds: BoxConstraint) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Config(format!("constraint bound must be positive and finite, got {eta}")));
        }
        Ok(Self {
            norm,
            eta,
            tau: None,
            bounds,
        })
    }

    pub fn with_weights(mut self, tau: Vec<f64>) -> Result<Self> {
        if let Some(t) = tau.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::Config(format!("pixel weights must be positive, got {t}")));
        }
        self.tau = Some(tau);
        Ok(self)
    }

    pub fn norm(&self) -> Schatten {
        self.norm
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn bounds(&self) -> BoxConstraint {
        self.bounds
    }

    /// `τ_ℓ`.
    pub fn weight(&self, pixel: usize) -> f64 {
        self.tau.as_ref().map_or(1.0, |t| t[pixel])
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.tau.as_deref()
    }

    pub(crate) fn check_pixels(&self, pixels: usize) -> Result<()> {
        match &self.tau {
            Some(t) => ensure_len("pixel weights", t.len(), pixels),
            None => Ok(()),
        }
    }
}

/// Layout of the epigraphical auxiliary variable `ζ` over pixels.
///
/// Structure-tensor coupling stores `min(M_ℓ, R)` entries per pixel for
/// `p = 1` (one per singular value) and a single entry otherwise;
/// channel-by-channel coupling stores one entry per matrix entry for `p = 1`
/// and one per column otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct EpiAuxiliary {
    coupling: Coupling,
    norm: Schatten,
    offsets: Vec<usize>,
    tau: Vec<f64>,
}

impl EpiAuxiliary {
    pub fn new(field_offsets: &[usize], cols: usize, coupling: Coupling, spec: &ConstraintSpec) -> Result<Self> {
        let pixels = field_offsets.len().saturating_sub(1);
        spec.check_pixels(pixels)?;
        let mut offsets = Vec::with_capacity(pixels + 1);
        offsets.push(0);
        let mut tau = Vec::new();
        for pixel in 0..pixels {
            let rows = field_offsets[pixel + 1] - field_offsets[pixel];
            let len = aux_len(coupling, spec.norm(), rows, cols);
            tau.extend(std::iter::repeat_n(spec.weight(pixel), len));
            offsets.push(offsets[pixel] + len);
        }
        Ok(Self {
            coupling,
            norm: spec.norm(),
            offsets,
            tau,
        })
    }

    pub fn for_field(field: &TensorField, coupling: Coupling, spec: &ConstraintSpec) -> Result<Self> {
        Self::new(field.offsets(), field.cols(), coupling, spec)
    }

    /// Total length `M̃` of `ζ`.
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// `τ` expanded to one entry per component of `ζ`; the half-space `W` is
    /// `{ζ : ⟨τ, ζ⟩ ≤ η}`.
    pub fn weights(&self) -> &[f64] {
        &self.tau
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    pub fn norm(&self) -> Schatten {
        self.norm
    }

    /// Per-pixel norms of `field` in this layout; the tightest `ζ` for which
    /// `(field, ζ)` lies in the epigraph set.
    pub fn norms(&self, field: &TensorField) -> Result<Vec<f64>> {
        self.check_field(field)?;
        let cols = field.cols();
        let mut out = vec![0.0; self.len()];
        let (coupling, norm) = (self.coupling, self.norm);
        split_ragged_mut(&mut out, &self.offsets, 1)
            .into_par_iter()
            .enumerate()
            .try_for_each(|(pixel, dst)| block_norms(field.block(pixel), cols, coupling, norm, dst))?;
        Ok(out)
    }

    /// `Σ_i τ_i aux_i` for the norms of `field`, i.e. the regularizer value.
    pub fn seminorm(&self, field: &TensorField) -> Result<f64> {
        let norms = self.norms(field)?;
        Ok(norms.iter().zip(&self.tau).map(|(a, t)| a * t).sum())
    }

    /// In-place projection of `(field, ζ)` onto the product of per-pixel
    /// epigraphs `E`.
    pub fn project_epigraphs(&self, field: &mut TensorField, zeta: &mut [f64]) -> Result<()> {
        self.check_field(field)?;
        ensure_len("auxiliary variable", zeta.len(), self.len())?;
        let cols = field.cols();
        let (coupling, norm) = (self.coupling, self.norm);
        field
            .blocks_mut()
            .into_par_iter()
            .zip(split_ragged_mut(zeta, &self.offsets, 1))
            .try_for_each(|(block, z)| {
                let rows = block.len() / cols.max(1);
                match coupling {
                    Coupling::StructureTensor => project_epi_block(block, rows, cols, z, norm),
                    Coupling::ChannelByChannel => {
                        project_epi_columns(block, cols, z, norm);
                        Ok(())
                    }
                }
            })
    }

    /// Projection onto `W`.
    pub fn project_halfspace(&self, zeta: &mut [f64], eta: f64) {
        project_halfspace(zeta, &self.tau, eta);
    }

    fn check_field(&self, field: &TensorField) -> Result<()> {
        ensure_len("tensor field pixels", field.pixels() + 1, self.offsets.len())
    }
}

fn aux_len(coupling: Coupling, norm: Schatten, rows: usize, cols: usize) -> usize {
    match (coupling, norm) {
        (Coupling::StructureTensor, _) => norm.aux_len(rows, cols),
        (Coupling::ChannelByChannel, Schatten::One) => rows * cols,
        (Coupling::ChannelByChannel, _) => cols,
    }
}

fn column(block: &[f64], cols: usize, c: usize) -> Vec<f64> {
    block.iter().skip(c).step_by(cols).copied().collect()
}

fn block_norms(block: &[f64], cols: usize, coupling: Coupling, norm: Schatten, dst: &mut [f64]) -> Result<()> {
    match (coupling, norm) {
        (Coupling::StructureTensor, Schatten::Two) => dst[0] = norm2(block),
        (Coupling::StructureTensor, _) => {
            let rows = block.len() / cols.max(1);
            let s = if rows.min(cols) == 0 {
                Vec::new()
            } else {
                thin_svd(&Mat::from_vec(rows, cols, block.to_vec()))?.s
            };
            if norm == Schatten::One {
                dst.copy_from_slice(&s);
            } else {
                dst[0] = s.first().copied().unwrap_or(0.0);
            }
        }
        (Coupling::ChannelByChannel, Schatten::One) => {
            for (d, v) in dst.iter_mut().zip(block) {
                *d = v.abs();
            }
        }
        (Coupling::ChannelByChannel, Schatten::Two) => {
            for (c, d) in dst.iter_mut().enumerate() {
                *d = norm2(&column(block, cols, c));
            }
        }
        (Coupling::ChannelByChannel, Schatten::Inf) => {
            for (c, d) in dst.iter_mut().enumerate() {
                *d = column(block, cols, c).iter().fold(0.0, |m, v| m.max(v.abs()));
            }
        }
    }
    Ok(())
}

fn project_epi_columns(block: &mut [f64], cols: usize, zeta: &mut [f64], norm: Schatten) {
    if norm == Schatten::One {
        for (v, z) in block.iter_mut().zip(zeta.iter_mut()) {
            (*v, *z) = project_epi_abs(*v, *z);
        }
        return;
    }
    for (c, z) in zeta.iter_mut().enumerate() {
        let mut col = column(block, cols, c);
        *z = match norm {
            Schatten::Two => project_epi_l2(&mut col, *z),
            _ => project_epi_linf_signed(&mut col, *z),
        };
        for (v, dst) in col.into_iter().zip(block.iter_mut().skip(c).step_by(cols)) {
            *dst = v;
        }
    }
}

/// Direct projection onto `D = {X : Σ τ_ℓ ‖X^(ℓ)‖_p ≤ η}` for `p ∈ {1, 2}`.
///
/// `p = 1` projects the concatenated singular values (entries, for
/// channel-by-channel coupling) onto the weighted ℓ1 ball and rebuilds each
/// block from its SVD; `p = 2` projects the per-block Frobenius norms (column
/// norms) onto the weighted ℓ1 ball and rescales.
pub fn project_d_direct(field: &mut TensorField, coupling: Coupling, spec: &ConstraintSpec) -> Result<()> {
    spec.check_pixels(field.pixels())?;
    let cols = field.cols();
    match (coupling, spec.norm()) {
        (_, Schatten::Inf) => Err(Error::Config(
            "direct projection is only available for p = 1 and p = 2; use the epigraphical mode".into(),
        )),
        (Coupling::StructureTensor, Schatten::One) => {
            let svds: Vec<Option<SvdResult>> = (0..field.pixels())
                .into_par_iter()
                .map(|pixel| {
                    let rows = field.rows_of(pixel);
                    if rows.min(cols) == 0 {
                        Ok(None)
                    } else {
                        thin_svd(&field.block_matrix(pixel)).map(Some)
                    }
                })
                .collect::<Result<_>>()?;
            let mut values = Vec::new();
            let mut tau = Vec::new();
            for (pixel, svd) in svds.iter().enumerate() {
                if let Some(svd) = svd {
                    values.extend_from_slice(&svd.s);
                    tau.extend(std::iter::repeat_n(spec.weight(pixel), svd.s.len()));
                }
            }
            let before = values.clone();
            project_l1_ball(&mut values, &tau, spec.eta());
            if values == before {
                return Ok(());
            }
            let mut at = 0;
            let mut slots = Vec::with_capacity(svds.len());
            for svd in &svds {
                let k = svd.as_ref().map_or(0, |s| s.s.len());
                slots.push(at..at + k);
                at += k;
            }
            field
                .blocks_mut()
                .into_par_iter()
                .zip(svds.par_iter())
                .zip(slots.par_iter())
                .for_each(|((block, svd), slot)| {
                    if let Some(svd) = svd {
                        svd.reassemble_into(&values[slot.clone()], block);
                    }
                });
            Ok(())
        }
        (Coupling::StructureTensor, Schatten::Two) => {
            let norms: Vec<f64> = (0..field.pixels()).map(|p| norm2(field.block(p))).collect();
            let tau: Vec<f64> = (0..field.pixels()).map(|p| spec.weight(p)).collect();
            let mut scaled = norms.clone();
            project_l1_ball(&mut scaled, &tau, spec.eta());
            for (pixel, (old, new)) in norms.iter().zip(&scaled).enumerate() {
                if new != old {
                    let f = if *old > 0.0 { new / old } else { 0.0 };
                    field.block_mut(pixel).iter_mut().for_each(|v| *v *= f);
                }
            }
            Ok(())
        }
        (Coupling::ChannelByChannel, Schatten::One) => {
            let mut tau = Vec::with_capacity(field.data().len());
            for pixel in 0..field.pixels() {
                tau.extend(std::iter::repeat_n(spec.weight(pixel), field.rows_of(pixel) * cols));
            }
            project_l1_ball(field.data_mut(), &tau, spec.eta());
            Ok(())
        }
        (Coupling::ChannelByChannel, Schatten::Two) => {
            let mut norms = Vec::with_capacity(field.pixels() * cols);
            let mut tau = Vec::with_capacity(field.pixels() * cols);
            for pixel in 0..field.pixels() {
                for c in 0..cols {
                    norms.push(norm2(&column(field.block(pixel), cols, c)));
                    tau.push(spec.weight(pixel));
                }
            }
            let mut scaled = norms.clone();
            project_l1_ball(&mut scaled, &tau, spec.eta());
            for pixel in 0..field.pixels() {
                let block = field.block_mut(pixel);
                for c in 0..cols {
                    let (old, new) = (norms[pixel * cols + c], scaled[pixel * cols + c]);
                    if new != old {
                        let f = if old > 0.0 { new / old } else { 0.0 };
                        block.iter_mut().skip(c).step_by(cols).for_each(|v| *v *= f);
                    }
                }
            }
            Ok(())
        }
    }
}
