use crate::error::{Error, Result};
use crate::matrix::{dot, Mat};

const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 60;

/// Thin SVD `X = U diag(s) Vᵀ` with `k = min(rows, cols)` triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    /// `rows × k`, orthonormal columns.
    pub u: Mat,
    /// Descending, nonnegative.
    pub s: Vec<f64>,
    /// `cols × k`, orthonormal columns.
    pub v: Mat,
}

impl SvdResult {
    /// `U diag(t) Vᵀ` for replacement singular values `t`.
    pub fn reassemble(&self, t: &[f64]) -> Mat {
        let mut out = Mat::zeros(self.u.rows(), self.v.rows());
        self.reassemble_into(t, out.as_mut_slice());
        out
    }

    pub(crate) fn reassemble_into(&self, t: &[f64], out: &mut [f64]) {
        let (m, n, k) = (self.u.rows(), self.v.rows(), self.s.len());
        debug_assert_eq!(t.len(), k);
        out.fill(0.0);
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for (j, &tj) in t.iter().enumerate() {
                let c = self.u[(i, j)] * tj;
                if c == 0.0 {
                    continue;
                }
                for (q, o) in row.iter_mut().enumerate() {
                    *o += c * self.v[(q, j)];
                }
            }
        }
    }
}

/// One-sided Jacobi SVD, orthogonalizing the vectors of the shorter
/// dimension. Columns are sorted by decreasing singular value and the first
/// nonzero entry of each `U` column is made nonnegative.
pub fn thin_svd(x: &Mat) -> Result<SvdResult> {
    let (m, n) = (x.rows(), x.cols());
    let wide = m <= n;
    // `b` holds k vectors of length d, stored as rows; rotations are mirrored in `q`
    let (k, d) = if wide { (m, n) } else { (n, m) };
    let mut b = if wide { x.clone() } else { x.transpose() };
    let mut q = Mat::identity(k);

    let mut converged = k < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for i in 0..k {
            for j in i + 1..k {
                let (bi, bj) = (b.row(i), b.row(j));
                let alpha = dot(bi, bi);
                let beta = dot(bj, bj);
                let gamma = dot(bi, bj);
                // the absolute floor stops sweeps between columns of very
                // different norms, where rounding keeps γ near eps·max(α, β)
                if gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() || gamma.abs() <= 2.0 * f64::EPSILON * alpha.max(beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(b.as_mut_slice(), d, i, j, c, s);
                rotate_rows(q.as_mut_slice(), k, i, j, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::SvdNoConvergence { sweeps: MAX_SWEEPS });
    }

    let norms: Vec<f64> = (0..k).map(|i| dot(b.row(i), b.row(i)).sqrt()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &c| norms[c].total_cmp(&norms[a]));

    // B = Q Xᵀ-or-X: the short-side vectors are Qᵀ, the long-side ones B/σ,
    // re-orthogonalized in order of decreasing σ to clean up pairs the
    // sweep left at rounding level; numerically null ones are completed
    let null = f64::EPSILON * d.max(k) as f64 * order.first().map_or(0.0, |&i| norms[i]);
    let mut short = Mat::zeros(k, k);
    let mut long = Mat::zeros(d, k);
    let mut s = Vec::with_capacity(k);
    let mut pending = Vec::new();
    for (col, &src) in order.iter().enumerate() {
        s.push(norms[src]);
        for r in 0..k {
            short[(r, col)] = q[(src, r)];
        }
        if norms[src] <= null {
            pending.push(col);
            continue;
        }
        let mut vec = b.row(src).to_vec();
        for _ in 0..2 {
            for prev in 0..col {
                if pending.contains(&prev) {
                    continue;
                }
                let proj: f64 = (0..d).map(|r| long[(r, prev)] * vec[r]).sum();
                for (r, v) in vec.iter_mut().enumerate() {
                    *v -= proj * long[(r, prev)];
                }
            }
        }
        let inv = 1.0 / dot(&vec, &vec).sqrt();
        for r in 0..d {
            long[(r, col)] = vec[r] * inv;
        }
    }
    complete_orthonormal(&mut long, &pending);

    let (mut u, mut v) = if wide { (short, long) } else { (long, short) };
    for col in 0..k {
        let first = (0..u.rows()).map(|r| u[(r, col)]).find(|a| a.abs() > 1e-14);
        if first.is_some_and(|a| a < 0.0) {
            for r in 0..u.rows() {
                u[(r, col)] = -u[(r, col)];
            }
            for r in 0..v.rows() {
                v[(r, col)] = -v[(r, col)];
            }
        }
    }
    Ok(SvdResult { u, s, v })
}

fn rotate_rows(data: &mut [f64], stride: usize, i: usize, j: usize, c: f64, s: f64) {
    let (head, tail) = data.split_at_mut(j * stride);
    let ri = &mut head[i * stride..(i + 1) * stride];
    let rj = &mut tail[..stride];
    for (a, b) in ri.iter_mut().zip(rj.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Fill the listed columns with unit vectors orthogonal to all other columns
/// (Gram-Schmidt over the canonical basis).
fn complete_orthonormal(m: &mut Mat, cols: &[usize]) {
    if cols.is_empty() {
        return;
    }
    let (d, k) = (m.rows(), m.cols());
    let mut filled: Vec<usize> = (0..k).filter(|c| !cols.contains(c)).collect();
    let mut basis = 0;
    for &c in cols {
        loop {
            let mut cand = vec![0.0; d];
            cand[basis % d] = 1.0;
            basis += 1;
            for _ in 0..2 {
                for &f in &filled {
                    let proj: f64 = (0..d).map(|r| m[(r, f)] * cand[r]).sum();
                    for (r, v) in cand.iter_mut().enumerate() {
                        *v -= proj * m[(r, f)];
                    }
                }
            }
            let norm = dot(&cand, &cand).sqrt();
            if norm > 1e-6 {
                for (r, v) in cand.iter().enumerate() {
                    m[(r, c)] = v / norm;
                }
                filled.push(c);
                break;
            }
        }
    }
}
