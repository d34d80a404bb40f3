use std::sync::Arc;

use crate::matrix::Mat;

/// Ragged stack of per-pixel matrices `X^(ℓ) ∈ R^{M_ℓ × R}`, stored row-major
/// and contiguously in pixel order.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    offsets: Arc<Vec<usize>>,
    cols: usize,
    data: Vec<f64>,
}

impl TensorField {
    /// `offsets` has `N + 1` entries; pixel `ℓ` owns rows `offsets[ℓ]..offsets[ℓ+1]`.
    pub fn zeros(offsets: Arc<Vec<usize>>, cols: usize) -> Self {
        let rows = *offsets.last().unwrap_or(&0);
        Self {
            offsets,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_data(offsets: Arc<Vec<usize>>, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), offsets.last().unwrap_or(&0) * cols, "tensor field data length");
        Self { offsets, cols, data }
    }

    pub fn pixels(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn total_rows(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn rows_of(&self, pixel: usize) -> usize {
        self.offsets[pixel + 1] - self.offsets[pixel]
    }

    pub fn offsets(&self) -> &Arc<Vec<usize>> {
        &self.offsets
    }

    pub fn block(&self, pixel: usize) -> &[f64] {
        &self.data[self.offsets[pixel] * self.cols..self.offsets[pixel + 1] * self.cols]
    }

    pub fn block_mut(&mut self, pixel: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[self.offsets[pixel] * c..self.offsets[pixel + 1] * c]
    }

    pub fn block_matrix(&self, pixel: usize) -> Mat {
        Mat::from_vec(self.rows_of(pixel), self.cols, self.block(pixel).to_vec())
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

    pub fn same_shape(&self, other: &TensorField) -> bool {
        self.cols == other.cols && (Arc::ptr_eq(&self.offsets, &other.offsets) || self.offsets == other.offsets)
    }

    /// Mutable per-pixel blocks, for data-parallel per-pixel kernels.
    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        split_ragged_mut(&mut self.data, &self.offsets, self.cols)
    }
}

/// Split `data` into consecutive chunks of `(offsets[i+1]-offsets[i]) * stride`.
pub(crate) fn split_ragged_mut<'a>(mut data: &'a mut [f64], offsets: &[usize], stride: usize) -> Vec<&'a mut [f64]> {
    let mut out = Vec::with_capacity(offsets.len().saturating_sub(1));
    for w in offsets.windows(2) {
        let (head, tail) = std::mem::take(&mut data).split_at_mut((w[1] - w[0]) * stride);
        out.push(head);
        data = tail;
    }
    out
}
