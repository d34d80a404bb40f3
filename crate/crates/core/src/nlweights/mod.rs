//! Patch-similarity weights and neighbourhood graphs for the non-local
//! regularizers, plus the local bootstrap estimate they are computed from.

mod sidecar;

use rayon::prelude::*;

use crate::error::{ensure_len, Error, Result};
use crate::image::{mirror_index, shifted_pixel, MultiComponentImage, WindowSpec};
use crate::operators::{AnalysisOperator, DegradationOperator, Regularizer};
use crate::projections::ConstraintSpec;
use crate::solvers::{mlfbf_solve, ProblemInstance, SolverConfig};

pub use sidecar::{read_graph, write_graph, GRAPH_MAGIC};

/// Stopping rule of the bootstrap solve.
pub const BOOTSTRAP_STOP_TOL: f64 = 1e-4;
pub const BOOTSTRAP_MAX_ITER: usize = 300;

/// Parameters of the patch similarity and the neighbour search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchSpec {
    /// Patch side `Q̃` (odd).
    pub patch: usize,
    /// Similarity bandwidth `δ`.
    pub delta: f64,
    /// Search window side `Q`.
    pub search: usize,
    /// Neighbour budget `M̄`.
    pub max_neighbors: usize,
    /// Standard deviation of the Gaussian patch window, in pixels.
    pub gaussian_std: f64,
}

impl Default for PatchSpec {
    fn default() -> Self {
        Self::new(5, 35.0, 11, 14).expect("default patch parameters are valid")
    }
}

impl PatchSpec {
    /// Gaussian std defaults to `(Q̃ − 1) / 4`.
    pub fn new(patch: usize, delta: f64, search: usize, max_neighbors: usize) -> Result<Self> {
        let spec = Self {
            patch,
            delta,
            search,
            max_neighbors,
            gaussian_std: (patch as f64 - 1.0) / 4.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch % 2 == 0 {
            return Err(Error::Config(format!("patch side must be odd, got {}", self.patch)));
        }
        if self.max_neighbors == 0 {
            return Err(Error::Config("neighbour budget must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("similarity bandwidth must be positive, got {}", self.delta)));
        }
        if !(self.gaussian_std >= 0.0) {
            return Err(Error::Config(format!("Gaussian std must be nonnegative, got {}", self.gaussian_std)));
        }
        WindowSpec::new(self.search).map_err(|_| Error::Config(format!("search window side must be >= 2, got {}", self.search)))?;
        Ok(())
    }

    /// Squared Gaussian window weights `g(dy, dx)²` over the patch, raster order.
    fn window_weights(&self) -> Vec<f64> {
        let h = (self.patch / 2) as isize;
        let mut out = Vec::with_capacity(self.patch * self.patch);
        for dy in -h..=h {
            for dx in -h..=h {
                let g = if self.gaussian_std > 0.0 {
                    (-((dy * dy + dx * dx) as f64) / (2.0 * self.gaussian_std * self.gaussian_std)).exp()
                } else if dy == 0 && dx == 0 {
                    1.0
                } else {
                    0.0
                };
                out.push(g * g);
            }
        }
        out
    }
}

/// Per-pixel neighbour lists with normalized positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodGraph {
    max_neighbors: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
}

impl NeighborhoodGraph {
    /// Checks: at most `max_neighbors` entries per pixel, in-range distinct
    /// neighbours other than the pixel itself, positive weights summing to 1
    /// (within 1e-12) on every nonempty list.
    pub fn from_lists(lists: Vec<Vec<(usize, f64)>>, max_neighbors: usize) -> Result<Self> {
        let n = lists.len();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut neighbors = Vec::new();
        let mut weights = Vec::new();
        for (pixel, list) in lists.into_iter().enumerate() {
            if list.len() > max_neighbors {
                return Err(Error::Contract(format!(
                    "pixel {pixel} has {} neighbours, budget is {max_neighbors}",
                    list.len()
                )));
            }
            let mut sum = 0.0;
            for (i, &(nb, w)) in list.iter().enumerate() {
                if nb >= n || nb == pixel || list[..i].iter().any(|&(o, _)| o == nb) {
                    return Err(Error::Contract(format!("pixel {pixel}: invalid neighbour {nb}")));
                }
                if !(w > 0.0 && w.is_finite()) {
                    return Err(Error::Contract(format!("pixel {pixel}: weight {w} is not positive")));
                }
                sum += w;
                neighbors.push(nb);
                weights.push(w);
            }
            if !list.is_empty() && (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Contract(format!("pixel {pixel}: weights sum to {sum}")));
            }
            offsets.push(neighbors.len());
        }
        Ok(Self {
            max_neighbors,
            offsets,
            neighbors,
            weights,
        })
    }

    pub fn pixels(&self) -> usize {
        self.offsets.len() - 1
    }

    /// `M̄`.
    pub fn max_neighbors(&self) -> usize {
        self.max_neighbors
    }

    /// `N_ℓ`.
    pub fn neighbors(&self, pixel: usize) -> &[usize] {
        &self.neighbors[self.offsets[pixel]..self.offsets[pixel + 1]]
    }

    /// `ω_{ℓ,n}` aligned with [`neighbors`](Self::neighbors).
    pub fn weights(&self, pixel: usize) -> &[f64] {
        &self.weights[self.offsets[pixel]..self.offsets[pixel + 1]]
    }

    pub fn edges(&self) -> usize {
        self.neighbors.len()
    }
}

/// Squared distance between the Gaussian-windowed `Q̃ × Q̃ × R` patches of
/// `x` centred at pixels `l` and `n`, with mirrored borders.
pub fn patch_distance(x: &MultiComponentImage, l: usize, n: usize, spec: &PatchSpec) -> Result<f64> {
    let pixels = x.pixels();
    if l >= pixels || n >= pixels {
        return Err(Error::Contract(format!("pixel index out of range (N = {pixels})")));
    }
    let (w, h) = (x.width(), x.height());
    let half = (spec.patch / 2) as isize;
    let g2 = spec.window_weights();
    let mut acc = 0.0;
    for r in 0..x.components() {
        let band = x.band(r);
        let mut k = 0;
        for dy in -half..=half {
            for dx in -half..=half {
                let a = band[shifted_pixel(l, dy, dx, w, h)];
                let b = band[shifted_pixel(n, dy, dx, w, h)];
                acc += g2[k] * (a - b) * (a - b);
                k += 1;
            }
        }
    }
    Ok(acc)
}

/// Mirror-padded copy of each band so patches can be read without index folding.
struct Padded {
    pad: usize,
    stride: usize,
    rows: usize,
    bands: Vec<Vec<f64>>,
}

impl Padded {
    fn new(x: &MultiComponentImage, pad: usize) -> Self {
        let (w, h) = (x.width(), x.height());
        let stride = w + 2 * pad;
        let rows = h + 2 * pad;
        let bands = (0..x.components())
            .map(|r| {
                let band = x.band(r);
                let mut out = Vec::with_capacity(stride * rows);
                for py in 0..rows {
                    let sy = mirror_index(py as isize - pad as isize, h);
                    for px in 0..stride {
                        let sx = mirror_index(px as isize - pad as isize, w);
                        out.push(band[sy * w + sx]);
                    }
                }
                out
            })
            .collect();
        Self { pad, stride, rows, bands }
    }

    fn distance(&self, width: usize, l: usize, n: usize, side: usize, g2: &[f64]) -> f64 {
        debug_assert!(side <= 2 * self.pad + 1 && self.rows > 0);
        let corner = |p: usize| (p / width) * self.stride + (p % width);
        let (cl, cn) = (corner(l), corner(n));
        let mut acc = 0.0;
        for band in &self.bands {
            let mut k = 0;
            for dy in 0..side {
                let (ra, rb) = (cl + dy * self.stride, cn + dy * self.stride);
                for dx in 0..side {
                    let d = band[ra + dx] - band[rb + dx];
                    acc += g2[k] * d * d;
                    k += 1;
                }
            }
        }
        acc
    }
}

/// Non-local graph of `x`: for every pixel, the distinct pixels of its
/// (mirrored) `Q × Q` search window other than itself are scored by
/// `exp(−δ⁻² d)`, with `d` the patch distance; the `M̄` best (ties to the lower
/// pixel index) are kept and their weights normalized to sum 1.
pub fn build_graph(x: &MultiComponentImage, spec: &PatchSpec) -> Result<NeighborhoodGraph> {
    spec.validate()?;
    if x.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("guide image has non-finite samples".into()));
    }
    let (w, h) = (x.width(), x.height());
    let window = WindowSpec::new(spec.search)?;
    let offsets: Vec<(isize, isize)> = window.offsets().collect();
    let half = spec.patch / 2;
    let padded = Padded::new(x, half);
    let g2 = spec.window_weights();
    let inv_delta2 = 1.0 / (spec.delta * spec.delta);

    let lists: Vec<Vec<(usize, f64)>> = (0..x.pixels())
        .into_par_iter()
        .map(|l| {
            let mut cands: Vec<(f64, usize)> = Vec::with_capacity(offsets.len());
            for &(dy, dx) in &offsets {
                let n = shifted_pixel(l, dy, dx, w, h);
                if n == l || cands.iter().any(|&(_, c)| c == n) {
                    continue;
                }
                cands.push((padded.distance(w, l, n, spec.patch, &g2), n));
            }
            cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cands.truncate(spec.max_neighbors);
            let dmin = cands.first().map_or(0.0, |c| c.0);
            let mut kept: Vec<(usize, f64)> = cands
                .iter()
                .map(|&(d, n)| (n, (-(d - dmin) * inv_delta2).exp().max(f64::MIN_POSITIVE)))
                .collect();
            let sum: f64 = kept.iter().map(|k| k.1).sum();
            kept.iter_mut().for_each(|k| k.1 /= sum);
            kept.sort_by_key(|k| k.0);
            kept
        })
        .collect();
    NeighborhoodGraph::from_lists(lists, spec.max_neighbors)
}

/// `cfg` with the bootstrap stopping rule.
pub fn bootstrap_config(cfg: &SolverConfig) -> SolverConfig {
    SolverConfig {
        max_iter: BOOTSTRAP_MAX_ITER,
        stop_tol: BOOTSTRAP_STOP_TOL,
        ..cfg.clone()
    }
}

/// Local estimate `x̃` used to compute the non-local weights: an ST-TV
/// constrained restoration of `z` by M+LFBF under `constraint`.
pub fn bootstrap_estimate(
    z: &[f64],
    a: &DegradationOperator,
    constraint: &ConstraintSpec,
    cfg: &SolverConfig,
) -> Result<MultiComponentImage> {
    ensure_len("observation", z.len(), crate::operators::LinearOperator::output_len(a))?;
    let phi = AnalysisOperator::tv(Regularizer::StTv, a.dims());
    let problem = ProblemInstance::new(z.to_vec(), a.clone(), phi, constraint.clone())?;
    let (x, trace) = mlfbf_solve(&problem, cfg)?;
    log::info!(
        "bootstrap estimate after {} iterations (converged: {})",
        trace.iterations(),
        trace.converged()
    );
    Ok(x)
}
