use rayon::prelude::*;

use super::{prox_quadratic_in_place, ConstraintMode, Monitor, ProblemInstance, SolverConfig, SolverTrace, Step};
use crate::error::{Error, Result};
use crate::image::{shifted_pixel, Dims, MultiComponentImage, WindowSpec};
use crate::matrix::{dot, norm2};
use crate::operators::{AnalysisOperator, LinearOperator, TensorField};
use crate::projections::{project_box, project_d_direct};

/// `G = [G_1; …; G_{Q²−1}]` with `G_q x = x − S_q x`, `S_q` the mirrored
/// shift by the `q`-th non-zero offset of a `Q × Q` window.
///
/// Output rows are indexed `(ℓ, q)` in pixel-major order, `R` columns each.
pub(crate) struct DifferenceStack {
    dims: Dims,
    shifts: usize,
    /// `shift[ℓ·shifts + q]` is the pixel reached from `ℓ` by offset `q`.
    shift: Vec<usize>,
}

impl DifferenceStack {
    pub(crate) fn new(dims: Dims, window: WindowSpec) -> Self {
        let offsets: Vec<(isize, isize)> = window.offsets().filter(|&o| o != (0, 0)).collect();
        let shifts = offsets.len();
        let mut shift = Vec::with_capacity(dims.pixels() * shifts);
        for l in 0..dims.pixels() {
            for &(dy, dx) in &offsets {
                shift.push(shifted_pixel(l, dy, dx, dims.width, dims.height));
            }
        }
        Self { dims, shifts, shift }
    }

    /// Smallest window (side 2 for nearest-neighbour TV, else odd) whose
    /// mirrored offsets reach every neighbour used by `phi`.
    pub(crate) fn covering(phi: &AnalysisOperator) -> Result<(Self, Vec<Option<usize>>)> {
        let dims = phi.dims();
        let mut side = 2;
        loop {
            let stack = Self::new(dims, WindowSpec::new(side)?);
            if let Some(sel) = stack.selection(phi) {
                return Ok((stack, sel));
            }
            side = if side == 2 { 3 } else { side + 2 };
            if side > 2 * dims.width.max(dims.height) + 1 {
                return Err(Error::Contract("analysis operator is not a windowed difference operator".into()));
            }
        }
    }

    /// For every row of `phi`, the `G` row holding the same difference.
    /// Identically zero rows (neighbour equal to the pixel) are left unpaired.
    fn selection(&self, phi: &AnalysisOperator) -> Option<Vec<Option<usize>>> {
        phi.rows()
            .map(|(l, n, _)| {
                if l == n {
                    return Some(None);
                }
                self.shift[l * self.shifts..(l + 1) * self.shifts]
                    .iter()
                    .position(|&m| m == n)
                    .map(|q| Some(l * self.shifts + q))
            })
            .collect()
    }

    fn rows(&self) -> usize {
        self.dims.pixels() * self.shifts
    }
}

impl LinearOperator for DifferenceStack {
    fn input_len(&self) -> usize {
        self.dims.len()
    }

    fn output_len(&self) -> usize {
        self.rows() * self.dims.components
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let (n, r_count, s) = (self.dims.pixels(), self.dims.components, self.shifts);
        out.par_chunks_mut(s * r_count).enumerate().for_each(|(l, rows)| {
            for q in 0..s {
                let m = self.shift[l * s + q];
                for r in 0..r_count {
                    rows[q * r_count + r] = x[r * n + l] - x[r * n + m];
                }
            }
        });
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let (n, r_count, s) = (self.dims.pixels(), self.dims.components, self.shifts);
        out.par_chunks_mut(n).enumerate().for_each(|(r, band)| {
            band.fill(0.0);
            for l in 0..n {
                for q in 0..s {
                    let v = y[(l * s + q) * r_count + r];
                    band[l] += v;
                    band[self.shift[l * s + q]] -= v;
                }
            }
        });
    }
}

/// `H = Id + GᵀG + AᵀA`.
struct Normal<'a> {
    g: &'a DifferenceStack,
    a: &'a dyn LinearOperator,
    gbuf: Vec<f64>,
    abuf: Vec<f64>,
    tmp: Vec<f64>,
}

impl Normal<'_> {
    fn apply(&mut self, v: &[f64], out: &mut [f64]) {
        self.g.apply_into(v, &mut self.gbuf);
        self.g.adjoint_into(&self.gbuf, out);
        self.a.apply_into(v, &mut self.abuf);
        self.a.adjoint_into(&self.abuf, &mut self.tmp);
        for ((o, t), vi) in out.iter_mut().zip(&self.tmp).zip(v) {
            *o += t + vi;
        }
    }
}

/// Conjugate gradient on `H x = b` from the current `x`; stops at
/// `‖b − Hx‖ ≤ tol ‖b‖`.
fn conjugate_gradient(h: &mut Normal<'_>, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<usize> {
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(0);
    }
    let mut hx = vec![0.0; n];
    h.apply(x, &mut hx);
    let mut r: Vec<f64> = b.iter().zip(&hx).map(|(a, c)| a - c).collect();
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    let target = tol * bnorm;
    let mut hp = vec![0.0; n];
    for it in 0..max_iter {
        if rs.sqrt() <= target {
            return Ok(it);
        }
        h.apply(&p, &mut hp);
        let alpha = rs / dot(&p, &hp);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * hp[i];
        }
        let next = dot(&r, &r);
        let beta = next / rs;
        rs = next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    if rs.sqrt() <= target {
        return Ok(max_iter);
    }
    Err(Error::CgNoConvergence {
        iterations: max_iter,
        residual: rs.sqrt() / bnorm,
    })
}

/// SDMM on the split `Φ = Ω G`, with the `x`-update solved by warm-started
/// conjugate gradient. Returns the last `y_1 = P_C(·)`.
pub fn sdmm_solve(problem: &ProblemInstance, cfg: &SolverConfig) -> Result<(MultiComponentImage, SolverTrace)> {
    let mut monitor = Monitor::new(problem, cfg)?;
    let gamma = cfg.sdmm_gamma;
    monitor.set_step(gamma);

    let (a, phi) = (problem.degradation(), problem.analysis());
    let z = problem.observation();
    let bounds = problem.constraint().bounds();
    let eta = problem.constraint().eta();
    let cols = phi.dims().components;
    let offsets = phi.offsets().clone();
    let epi = cfg.mode == ConstraintMode::Epigraphical;
    let aux = problem.auxiliary()?;
    let (g, select) = DifferenceStack::covering(phi)?;
    let weights: Vec<f64> = phi.rows().map(|(_, _, w)| w).collect();

    let (nx, ng, nm, nz) = (phi.input_len(), g.output_len(), phi.output_len(), a.output_len());
    let x0 = problem.initial_point();
    let phix0 = phi.apply_vec(&x0);
    let norms0 = if epi {
        aux.norms(&TensorField::from_data(offsets.clone(), cols, phix0.clone()))?
    } else {
        Vec::new()
    };
    let nl = norms0.len();

    let mut x = x0.clone();
    let mut y1 = x0;
    let mut y1b = vec![0.0; nx];
    let mut y2 = g.apply_vec(&y1);
    let mut y2b = vec![0.0; ng];
    let mut y3 = a.apply_vec(&y1);
    let mut y3b = vec![0.0; nz];
    let mut chi1 = phix0.clone();
    let mut chi1b = vec![0.0; nm];
    let mut chi2 = phix0;
    let mut chi2b = vec![0.0; nm];
    let mut e1 = norms0.clone();
    let mut e1b = vec![0.0; nl];
    let mut w = norms0;
    let mut wb = vec![0.0; nl];

    let mut normal = Normal {
        g: &g,
        a,
        gbuf: vec![0.0; ng],
        abuf: vec![0.0; nz],
        tmp: vec![0.0; nx],
    };
    let mut rhs = vec![0.0; nx];
    let mut tmp = vec![0.0; nx];
    let mut gdiff = vec![0.0; ng];
    let mut adiff = vec![0.0; nz];
    let mut xi = vec![0.0; nm];
    let mut zeta = vec![0.0; nl];
    let mut gx = vec![0.0; ng];
    let mut ax = vec![0.0; nz];
    let mut prev = vec![0.0; nx];

    let mut converged = false;
    for iter in 1..=cfg.max_iter {
        // x = H⁻¹[(y1 − ȳ1) + Gᵀ(Y2 − Ȳ2) + Aᵀ(y3 − ȳ3)]
        for i in 0..ng {
            gdiff[i] = y2[i] - y2b[i];
        }
        g.adjoint_into(&gdiff, &mut rhs);
        for i in 0..nz {
            adiff[i] = y3[i] - y3b[i];
        }
        a.adjoint_into(&adiff, &mut tmp);
        for i in 0..nx {
            rhs[i] += tmp[i] + y1[i] - y1b[i];
        }
        prev.copy_from_slice(&x);
        conjugate_gradient(&mut normal, &rhs, &mut x, cfg.cg_tol, cfg.cg_max_iter)?;

        for i in 0..nm {
            xi[i] = 0.5 * (chi1[i] - chi1b[i]) + 0.5 * (chi2[i] - chi2b[i]);
        }
        for i in 0..nl {
            zeta[i] = 0.5 * (e1[i] - e1b[i]) + 0.5 * (w[i] - wb[i]);
        }

        // y1 = P_C(x + ȳ1)
        for i in 0..nx {
            y1[i] = x[i] + y1b[i];
        }
        project_box(&mut y1, bounds.lo(), bounds.hi());

        // χ1 (and e1) through P_D or P_E; w through P_W
        for i in 0..nm {
            chi1[i] = xi[i] + chi1b[i];
        }
        let mut field = TensorField::from_data(offsets.clone(), cols, std::mem::take(&mut chi1));
        if epi {
            for i in 0..nl {
                e1[i] = zeta[i] + e1b[i];
                w[i] = zeta[i] + wb[i];
            }
            aux.project_epigraphs(&mut field, &mut e1)?;
            aux.project_halfspace(&mut w, eta);
        } else {
            project_d_direct(&mut field, phi.coupling(), problem.constraint())?;
        }
        chi1 = field.into_data();

        // (Y2, χ2) = P_V(Gx + Ȳ2, ξ + χ̄2)
        g.apply_into(&x, &mut gx);
        for i in 0..ng {
            y2[i] = gx[i] + y2b[i];
        }
        for (j, (&row, &om)) in select.iter().zip(&weights).enumerate() {
            let Some(row) = row else {
                chi2[j * cols..(j + 1) * cols].fill(0.0);
                continue;
            };
            for c in 0..cols {
                let ga = y2[row * cols + c];
                let xb = xi[j * cols + c] + chi2b[j * cols + c];
                let a2 = (ga + om * xb) / (1.0 + om * om);
                y2[row * cols + c] = a2;
                chi2[j * cols + c] = om * a2;
            }
        }

        // y3 = prox_{γf}(Ax + ȳ3)
        a.apply_into(&x, &mut ax);
        for i in 0..nz {
            y3[i] = ax[i] + y3b[i];
        }
        prox_quadratic_in_place(&mut y3, z, gamma);

        // scaled dual updates
        for i in 0..nx {
            y1b[i] += x[i] - y1[i];
        }
        for i in 0..nm {
            chi1b[i] += xi[i] - chi1[i];
            chi2b[i] += xi[i] - chi2[i];
        }
        for i in 0..ng {
            y2b[i] += gx[i] - y2[i];
        }
        for i in 0..nz {
            y3b[i] += ax[i] - y3[i];
        }
        for i in 0..nl {
            e1b[i] += zeta[i] - e1[i];
            wb[i] += zeta[i] - w[i];
        }

        // the first x-update reproduces x0 by construction of the
        // initialization, so its zero change is not a stopping signal
        if let Step::Converged = monitor.observe(iter, &prev, &x, &y1)? {
            if iter > 1 {
                converged = true;
                break;
            }
        }
    }
    monitor.finish(converged, y1)
}
