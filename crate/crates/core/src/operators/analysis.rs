use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use super::{LinearOperator, TensorField};
use crate::error::{Error, Result};
use crate::image::{shifted_pixel, Dims, MultiComponentImage};
use crate::nlweights::NeighborhoodGraph;

/// How the columns of each block `X^(ℓ)` are grouped by the regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// One Schatten norm per block: components are coupled through the
    /// singular values.
    StructureTensor,
    /// One vector norm per column: `Σ_r Σ_ℓ τ_ℓ ‖X_r^(ℓ)‖_p`.
    ChannelByChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularizer {
    StTv,
    StNltv,
    CcTv,
    CcNltv,
}

impl Regularizer {
    pub fn coupling(self) -> Coupling {
        match self {
            Regularizer::StTv | Regularizer::StNltv => Coupling::StructureTensor,
            Regularizer::CcTv | Regularizer::CcNltv => Coupling::ChannelByChannel,
        }
    }

    pub fn is_nonlocal(self) -> bool {
        matches!(self, Regularizer::StNltv | Regularizer::CcNltv)
    }

    /// The local (TV) regularizer with the same coupling.
    pub fn local_counterpart(self) -> Regularizer {
        match self.coupling() {
            Coupling::StructureTensor => Regularizer::StTv,
            Coupling::ChannelByChannel => Regularizer::CcTv,
        }
    }
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regularizer::StTv => "st-tv",
            Regularizer::StNltv => "st-nltv",
            Regularizer::CcTv => "cc-tv",
            Regularizer::CcNltv => "cc-nltv",
        })
    }
}

impl FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "st-tv" => Ok(Regularizer::StTv),
            "st-nltv" => Ok(Regularizer::StNltv),
            "cc-tv" => Ok(Regularizer::CcTv),
            "cc-nltv" => Ok(Regularizer::CcNltv),
            other => Err(Error::Config(format!(
                "unknown regularizer {other:?} (expected st-tv, st-nltv, cc-tv or cc-nltv)"
            ))),
        }
    }
}

/// Row structure shared by every difference operator: row `j` of pixel `ℓ`
/// holds `w_j · (x^(ℓ) − x^(n_j))` for each component.
#[derive(Debug)]
struct RowLayout {
    offsets: Arc<Vec<usize>>,
    row_pixel: Vec<usize>,
    row_neighbor: Vec<usize>,
    row_weight: Vec<f64>,
    /// Rows whose neighbour is a given pixel (transpose adjacency, CSR).
    in_offsets: Vec<usize>,
    in_rows: Vec<usize>,
}

impl RowLayout {
    fn build(n: usize, rows: impl Fn(usize) -> Vec<(usize, f64)>) -> Self {
        let mut offsets = Vec::with_capacity(n + 1);
        let mut row_pixel = Vec::new();
        let mut row_neighbor = Vec::new();
        let mut row_weight = Vec::new();
        offsets.push(0);
        for pixel in 0..n {
            for (nb, w) in rows(pixel) {
                row_pixel.push(pixel);
                row_neighbor.push(nb);
                row_weight.push(w);
            }
            offsets.push(row_pixel.len());
        }
        let mut counts = vec![0usize; n + 1];
        for &nb in &row_neighbor {
            counts[nb + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let in_offsets = counts.clone();
        let mut in_rows = vec![0; row_neighbor.len()];
        let mut cursor = counts;
        for (row, &nb) in row_neighbor.iter().enumerate() {
            in_rows[cursor[nb]] = row;
            cursor[nb] += 1;
        }
        Self {
            offsets: Arc::new(offsets),
            row_pixel,
            row_neighbor,
            row_weight,
            in_offsets,
            in_rows,
        }
    }
}

/// The analysis operator `Φ : x ↦ (F_ℓ B_ℓ x)_ℓ` for the TV and NLTV
/// block transforms.
#[derive(Debug, Clone)]
pub struct AnalysisOperator {
    regularizer: Regularizer,
    dims: Dims,
    layout: Arc<RowLayout>,
}

impl AnalysisOperator {
    /// Build the operator for `regularizer`; non-local variants need a graph.
    pub fn new(regularizer: Regularizer, dims: Dims, graph: Option<&NeighborhoodGraph>) -> Result<Self> {
        if regularizer.is_nonlocal() {
            let graph = graph.ok_or_else(|| {
                Error::Config(format!("{regularizer} requires a neighbourhood graph"))
            })?;
            Self::nonlocal(regularizer, dims, graph)
        } else {
            Ok(Self::tv(regularizer, dims))
        }
    }

    /// ST-TV / CC-TV: differences with the right and bottom neighbours. At the
    /// last column/row the mirrored neighbour is the pixel itself, giving a
    /// zero row.
    pub fn tv(regularizer: Regularizer, dims: Dims) -> Self {
        let (w, h) = (dims.width, dims.height);
        let layout = RowLayout::build(dims.pixels(), |pixel| {
            vec![
                (shifted_pixel(pixel, 0, 1, w, h), 1.0),
                (shifted_pixel(pixel, 1, 0, w, h), 1.0),
            ]
        });
        Self {
            regularizer: regularizer.local_counterpart(),
            dims,
            layout: Arc::new(layout),
        }
    }

    pub fn nonlocal(regularizer: Regularizer, dims: Dims, graph: &NeighborhoodGraph) -> Result<Self> {
        if graph.pixels() != dims.pixels() {
            return Err(Error::Dimension(format!(
                "graph covers {} pixels, image has {}",
                graph.pixels(),
                dims.pixels()
            )));
        }
        let layout = RowLayout::build(dims.pixels(), |pixel| {
            graph
                .neighbors(pixel)
                .iter()
                .copied()
                .zip(graph.weights(pixel).iter().copied())
                .collect()
        });
        let regularizer = match regularizer.coupling() {
            Coupling::StructureTensor => Regularizer::StNltv,
            Coupling::ChannelByChannel => Regularizer::CcNltv,
        };
        Ok(Self {
            regularizer,
            dims,
            layout: Arc::new(layout),
        })
    }

    pub fn regularizer(&self) -> Regularizer {
        self.regularizer
    }

    pub fn coupling(&self) -> Coupling {
        self.regularizer.coupling()
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Row offsets (`N + 1` entries) of the produced tensor fields.
    pub fn offsets(&self) -> &Arc<Vec<usize>> {
        &self.layout.offsets
    }

    /// `M_ℓ`.
    pub fn rows_of(&self, pixel: usize) -> usize {
        self.layout.offsets[pixel + 1] - self.layout.offsets[pixel]
    }

    /// `M = Σ M_ℓ`.
    pub fn total_rows(&self) -> usize {
        self.layout.row_pixel.len()
    }

    /// `(pixel, neighbour, weight)` for every row, in storage order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let l = &self.layout;
        (0..l.row_pixel.len()).map(move |i| (l.row_pixel[i], l.row_neighbor[i], l.row_weight[i]))
    }

    pub fn zero_field(&self) -> TensorField {
        TensorField::zeros(self.layout.offsets.clone(), self.dims.components)
    }

    pub fn analyze(&self, x: &MultiComponentImage) -> Result<TensorField> {
        if x.dims() != self.dims {
            return Err(Error::Dimension(format!(
                "image is {:?}, operator expects {:?}",
                x.dims(),
                self.dims
            )));
        }
        let mut field = self.zero_field();
        self.apply_into(x.data(), field.data_mut());
        Ok(field)
    }

    pub fn adjoint_analyze(&self, field: &TensorField) -> Result<MultiComponentImage> {
        if field.cols() != self.dims.components || field.offsets().as_slice() != self.layout.offsets.as_slice() {
            return Err(Error::Dimension("tensor field shape does not match the operator".into()));
        }
        let data = self.adjoint_vec(field.data());
        MultiComponentImage::new(self.dims.width, self.dims.height, self.dims.components, data)
    }
}

impl LinearOperator for AnalysisOperator {
    fn input_len(&self) -> usize {
        self.dims.len()
    }

    fn output_len(&self) -> usize {
        self.total_rows() * self.dims.components
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.input_len());
        debug_assert_eq!(out.len(), self.output_len());
        let n = self.dims.pixels();
        let rc = self.dims.components;
        let l = &*self.layout;
        out.par_chunks_mut(rc).enumerate().for_each(|(row, dst)| {
            let (p, nb, w) = (l.row_pixel[row], l.row_neighbor[row], l.row_weight[row]);
            for (r, d) in dst.iter_mut().enumerate() {
                *d = w * (x[r * n + p] - x[r * n + nb]);
            }
        });
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.output_len());
        debug_assert_eq!(out.len(), self.input_len());
        let n = self.dims.pixels();
        let rc = self.dims.components;
        let l = &*self.layout;
        out.par_chunks_mut(n).enumerate().for_each(|(r, band)| {
            for (pixel, v) in band.iter_mut().enumerate() {
                let mut acc = 0.0;
                for row in l.offsets[pixel]..l.offsets[pixel + 1] {
                    acc += l.row_weight[row] * y[row * rc + r];
                }
                for &row in &l.in_rows[l.in_offsets[pixel]..l.in_offsets[pixel + 1]] {
                    acc -= l.row_weight[row] * y[row * rc + r];
                }
                *v = acc;
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(rng: &mut ChaCha8Rng, w: usize, h: usize, max: usize) -> NeighborhoodGraph {
        let n = w * h;
        let mut lists = Vec::new();
        for pixel in 0..n {
            let count = if n > 1 { rng.random_range(1..=max.min(n - 1)) } else { 0 };
            let mut nbs: Vec<usize> = rand::seq::index::sample(rng, n, n).into_iter().filter(|&q| q != pixel).take(count).collect();
            nbs.sort_unstable();
            let raw: Vec<f64> = nbs.iter().map(|_| rng.random_range(0.1..1.0)).collect();
            let s: f64 = raw.iter().sum();
            lists.push(nbs.into_iter().zip(raw.into_iter().map(|v| v / s)).collect());
        }
        NeighborhoodGraph::from_lists(lists, max).unwrap()
    }

    #[test]
    fn constant_image_has_zero_field() {
        let dims = Dims::new(4, 3, 2);
        let x = MultiComponentImage::from_fn(4, 3, 2, |_, _, r| 3.0 + r as f64);
        let op = AnalysisOperator::tv(Regularizer::StTv, dims);
        assert!(op.analyze(&x).unwrap().data().iter().all(|&v| v == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_graph(&mut rng, 4, 3, 4);
        let op = AnalysisOperator::new(Regularizer::StNltv, dims, Some(&g)).unwrap();
        assert!(op.analyze(&x).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tv_two_by_one() {
        let (a, b) = (5.0, 2.0);
        let x = MultiComponentImage::new(2, 1, 1, vec![a, b]).unwrap();
        let op = AnalysisOperator::tv(Regularizer::StTv, x.dims());
        let f = op.analyze(&x).unwrap();
        assert_eq!(f.block(0), &[a - b, 0.0]);
        // last column mirrors to itself
        assert_eq!(f.block(1), &[0.0, 0.0]);
    }

    #[test]
    fn nltv_hand_computation() {
        let x = MultiComponentImage::from_fn(3, 3, 1, |r, c, _| ((r * 3 + c) * (r * 3 + c)) as f64);
        let mut lists = vec![Vec::new(); 9];
        lists[4] = vec![(0, 0.6), (8, 0.4)];
        lists[0] = vec![(1, 1.0)];
        let g = NeighborhoodGraph::from_lists(lists, 2).unwrap();
        let op = AnalysisOperator::new(Regularizer::StNltv, x.dims(), Some(&g)).unwrap();
        let f = op.analyze(&x).unwrap();
        assert_eq!(f.rows_of(4), 2);
        assert_eq!(f.block(4), &[0.6 * (16.0 - 0.0), 0.4 * (16.0 - 64.0)]);
        assert_eq!(f.block(0), &[1.0 * (0.0 - 1.0)]);
        assert_eq!(f.rows_of(1), 0);
    }

    #[test]
    fn nonlocal_without_graph_is_config_error() {
        let err = AnalysisOperator::new(Regularizer::CcNltv, Dims::new(2, 2, 1), None).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn zero_field_adjoint_is_zero() {
        let op = AnalysisOperator::tv(Regularizer::StTv, Dims::new(3, 3, 2));
        let img = op.adjoint_analyze(&op.zero_field()).unwrap();
        assert!(img.data().iter().all(|&v| v == 0.0));
    }

    fn check_adjoint(op: &AnalysisOperator, rng: &mut ChaCha8Rng) {
        let x: Vec<f64> = (0..op.input_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..op.output_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs: f64 = op.apply_vec(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = op.adjoint_vec(&y).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1e-300), "{lhs} vs {rhs}");
    }

    #[test]
    fn adjoint_identity_all_variants() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let (w, h, r) = (rng.random_range(1..8), rng.random_range(1..8), rng.random_range(1..4));
            let dims = Dims::new(w, h, r);
            let g = random_graph(&mut rng, w, h, 6);
            for reg in [Regularizer::StTv, Regularizer::CcTv, Regularizer::StNltv, Regularizer::CcNltv] {
                let op = AnalysisOperator::new(reg, dims, Some(&g)).unwrap();
                check_adjoint(&op, &mut rng);
            }
        }
    }

    #[test]
    fn adjoint_matches_dense_transpose() {
        let dims = Dims::new(3, 3, 2);
        let op = AnalysisOperator::tv(Regularizer::StTv, dims);
        let n_in = op.input_len();
        let n_out = op.output_len();
        // dense Φ from the defining formula
        let mut phi = vec![vec![0.0; n_in]; n_out];
        for (row, (p, nb, w)) in op.rows().enumerate() {
            for r in 0..2 {
                phi[row * 2 + r][r * 9 + p] += w;
                phi[row * 2 + r][r * 9 + nb] -= w;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y: Vec<f64> = (0..n_out).map(|_| rng.random_range(-1.0..1.0)).collect();
        let at = op.adjoint_vec(&y);
        for j in 0..n_in {
            let expected: f64 = (0..n_out).map(|i| phi[i][j] * y[i]).sum();
            assert!((expected - at[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn cc_and_st_fields_coincide() {
        let dims = Dims::new(4, 4, 3);
        let x = MultiComponentImage::from_fn(4, 4, 3, |r, c, b| ((r * 7 + c * 3 + b) % 5) as f64);
        let st = AnalysisOperator::tv(Regularizer::StTv, dims).analyze(&x).unwrap();
        let cc = AnalysisOperator::tv(Regularizer::CcTv, dims).analyze(&x).unwrap();
        assert_eq!(st, cc);
    }

    #[test]
    fn analyze_is_linear() {
        let dims = Dims::new(5, 4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_graph(&mut rng, 5, 4, 5);
        let op = AnalysisOperator::new(Regularizer::StNltv, dims, Some(&g)).unwrap();
        let x: Vec<f64> = (0..dims.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..dims.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, b) = (0.7, -1.3);
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = op.apply_vec(&combo);
        let (fx, fy) = (op.apply_vec(&x), op.apply_vec(&y));
        for i in 0..lhs.len() {
            assert!((lhs[i] - (a * fx[i] + b * fy[i])).abs() < 1e-12);
        }
    }
}
