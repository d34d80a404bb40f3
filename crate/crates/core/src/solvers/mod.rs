//! Constrained restoration solvers: the primal-dual M+LFBF iteration and the
//! SDMM baseline, both in epigraphical or direct-projection mode.

mod mlfbf;
mod sdmm;
mod trace;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::image::MultiComponentImage;
use crate::matrix::{distance, norm2};
use crate::operators::{AnalysisOperator, DegradationOperator, LinearOperator};
use crate::projections::{project_box, ConstraintSpec, EpiAuxiliary};

pub use mlfbf::mlfbf_solve;
pub use sdmm::sdmm_solve;
pub use trace::{relative_error_trace, RelativeErrorPoint, SolverTrace, TraceRecord};

/// Problems with more unknowns than this are logged every tenth iteration.
pub const DENSE_LOG_LIMIT: usize = 100_000;

/// `minimize ‖A x − z‖²  s.t.  x ∈ C,  Σ_ℓ τ_ℓ ‖(Φx)^(ℓ)‖_p ≤ η`.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    z: Vec<f64>,
    a: DegradationOperator,
    phi: AnalysisOperator,
    constraint: ConstraintSpec,
}

impl ProblemInstance {
    pub fn new(z: Vec<f64>, a: DegradationOperator, phi: AnalysisOperator, constraint: ConstraintSpec) -> Result<Self> {
        ensure_len("observation", z.len(), a.output_len())?;
        if a.dims() != phi.dims() {
            return Err(Error::Dimension(format!(
                "degradation acts on {:?}, analysis operator on {:?}",
                a.dims(),
                phi.dims()
            )));
        }
        constraint.check_pixels(a.dims().pixels())?;
        Ok(Self { z, a, phi, constraint })
    }

    pub fn observation(&self) -> &[f64] {
        &self.z
    }

    pub fn degradation(&self) -> &DegradationOperator {
        &self.a
    }

    pub fn analysis(&self) -> &AnalysisOperator {
        &self.phi
    }

    pub fn constraint(&self) -> &ConstraintSpec {
        &self.constraint
    }

    /// `f(Ax, z) = ‖Ax − z‖²`.
    pub fn fidelity(&self, x: &[f64]) -> f64 {
        let ax = self.a.apply_vec(x);
        let d = distance(&ax, &self.z);
        d * d
    }

    /// `g(x) = Σ_ℓ τ_ℓ ‖(Φx)^(ℓ)‖_p`.
    pub fn seminorm(&self, x: &[f64]) -> Result<f64> {
        let field = crate::operators::TensorField::from_data(
            self.phi.offsets().clone(),
            self.phi.dims().components,
            self.phi.apply_vec(x),
        );
        self.auxiliary()?.seminorm(&field)
    }

    pub(crate) fn auxiliary(&self) -> Result<EpiAuxiliary> {
        EpiAuxiliary::new(
            self.phi.offsets(),
            self.phi.dims().components,
            self.phi.coupling(),
            &self.constraint,
        )
    }

    /// `P_C(Aᵀ z)`.
    pub fn initial_point(&self) -> Vec<f64> {
        let mut x = self.a.adjoint_vec(&self.z);
        let b = self.constraint.bounds();
        project_box(&mut x, b.lo(), b.hi());
        x
    }

    fn image(&self, data: Vec<f64>) -> Result<MultiComponentImage> {
        let d = self.a.dims();
        MultiComponentImage::new(d.width, d.height, d.components, data)
    }
}

/// How the constraint on `Φx` is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    /// Split into per-pixel epigraphs `E` and the half-space `W`.
    #[default]
    Epigraphical,
    /// Project onto `D` with the weighted ℓ1-ball projector.
    Direct,
}

impl fmt::Display for ConstraintMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintMode::Epigraphical => "epigraphical",
            ConstraintMode::Direct => "direct",
        })
    }
}

impl FromStr for ConstraintMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epigraphical" | "epi" => Ok(ConstraintMode::Epigraphical),
            "direct" => Ok(ConstraintMode::Direct),
            other => Err(Error::Config(format!("unknown constraint mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Mlfbf,
    Sdmm,
}

impl SolverKind {
    pub fn solve(self, problem: &ProblemInstance, cfg: &SolverConfig) -> Result<(MultiComponentImage, SolverTrace)> {
        match self {
            SolverKind::Mlfbf => mlfbf_solve(problem, cfg),
            SolverKind::Sdmm => sdmm_solve(problem, cfg),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Mlfbf => "mlfbf",
            SolverKind::Sdmm => "sdmm",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlfbf" | "m+lfbf" => Ok(SolverKind::Mlfbf),
            "sdmm" => Ok(SolverKind::Sdmm),
            other => Err(Error::Config(format!("unknown solver {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Stop once `‖x^{t+1} − x^t‖ ≤ stop_tol ‖x^t‖`.
    pub stop_tol: f64,
    /// Step margin `ε`; M+LFBF uses `γ = (1 − ε)/θ`.
    pub epsilon: f64,
    pub mode: ConstraintMode,
    /// Seed of the power-iteration start vectors.
    pub seed: u64,
    /// SDMM penalty `γ`.
    pub sdmm_gamma: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub norm_tol: f64,
    pub norm_max_iter: usize,
    /// Logging stride; by default 1, or 10 beyond [`DENSE_LOG_LIMIT`] unknowns.
    pub log_every: Option<usize>,
    /// Keep the logged estimates in the trace (for relative-error curves).
    pub keep_iterates: bool,
    /// Record cumulative seconds in the trace.
    pub timing: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            stop_tol: 1e-5,
            epsilon: 0.01,
            mode: ConstraintMode::Epigraphical,
            seed: 0,
            sdmm_gamma: 1.0,
            cg_tol: 1e-8,
            cg_max_iter: 5000,
            norm_tol: 1e-4,
            norm_max_iter: 1000,
            log_every: None,
            keep_iterates: false,
            timing: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::Config(format!("stop_tol must be nonnegative, got {}", self.stop_tol)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.sdmm_gamma > 0.0 && self.sdmm_gamma.is_finite()) {
            return Err(Error::Config(format!("sdmm_gamma must be positive, got {}", self.sdmm_gamma)));
        }
        if !(self.cg_tol > 0.0) || self.cg_max_iter == 0 {
            return Err(Error::Config("CG tolerance and iteration cap must be positive".into()));
        }
        if self.log_every == Some(0) {
            return Err(Error::Config("log_every must be positive".into()));
        }
        Ok(())
    }

    fn stride(&self, unknowns: usize) -> usize {
        self.log_every
            .unwrap_or(if unknowns > DENSE_LOG_LIMIT { 10 } else { 1 })
    }
}

/// `prox_{γ‖· − z‖²}(y) = (y + 2γz) / (1 + 2γ)`, entrywise.
pub fn prox_quadratic(y: &[f64], z: &[f64], gamma: f64) -> Vec<f64> {
    y.iter().zip(z).map(|(a, b)| (a + 2.0 * gamma * b) / (1.0 + 2.0 * gamma)).collect()
}

pub(crate) fn prox_quadratic_in_place(y: &mut [f64], z: &[f64], gamma: f64) {
    let s = 1.0 / (1.0 + 2.0 * gamma);
    for (a, b) in y.iter_mut().zip(z) {
        *a = (*a + 2.0 * gamma * b) * s;
    }
}

/// Shared loop bookkeeping: timing that excludes instrumentation, logging
/// stride, stopping and divergence checks.
pub(crate) struct Monitor<'a> {
    problem: &'a ProblemInstance,
    cfg: &'a SolverConfig,
    aux: EpiAuxiliary,
    stride: usize,
    clock: Instant,
    paused: f64,
    trace: SolverTrace,
}

pub(crate) enum Step {
    Continue,
    Converged,
}

impl<'a> Monitor<'a> {
    pub(crate) fn new(problem: &'a ProblemInstance, cfg: &'a SolverConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.mode == ConstraintMode::Direct && problem.constraint().norm() == crate::projections::Schatten::Inf {
            return Err(Error::Config(
                "direct projection is only available for p = 1 and p = 2; use the epigraphical mode".into(),
            ));
        }
        Ok(Self {
            problem,
            cfg,
            aux: problem.auxiliary()?,
            stride: cfg.stride(problem.degradation().dims().len()),
            clock: Instant::now(),
            paused: 0.0,
            trace: SolverTrace::default(),
        })
    }

    pub(crate) fn set_step(&mut self, step: f64) {
        self.trace.step = step;
    }

    fn seconds(&self) -> f64 {
        self.clock.elapsed().as_secs_f64() - self.paused
    }

    /// Record iteration `iter` (1-based) given the previous and new primal
    /// iterates and the current feasible estimate.
    pub(crate) fn observe(&mut self, iter: usize, prev: &[f64], next: &[f64], estimate: &[f64]) -> Result<Step> {
        let base = norm2(prev);
        let change = distance(next, prev);
        let rel = if base > 0.0 { change / base } else if change == 0.0 { 0.0 } else { f64::INFINITY };
        self.trace.iterations = iter;
        if !change.is_finite() || next.iter().any(|v| !v.is_finite()) {
            self.trace.elapsed = self.seconds();
            return Err(Error::Divergence {
                iteration: iter,
                trace: Box::new(std::mem::take(&mut self.trace)),
            });
        }
        let done = rel <= self.cfg.stop_tol;
        if iter % self.stride == 0 || done || iter == self.cfg.max_iter {
            let now = self.seconds();
            let pause = Instant::now();
            let gap = self.seminorm(estimate)? - self.problem.constraint().eta();
            self.trace.records.push(TraceRecord {
                iter,
                seconds: self.cfg.timing.then_some(now),
                rel_change: rel,
                feasibility_gap: gap,
                fidelity: self.problem.fidelity(estimate),
            });
            if self.cfg.keep_iterates {
                self.trace.iterates.push((iter, estimate.to_vec()));
            }
            self.paused += pause.elapsed().as_secs_f64();
        }
        Ok(if done { Step::Converged } else { Step::Continue })
    }

    fn seminorm(&self, x: &[f64]) -> Result<f64> {
        let field = crate::operators::TensorField::from_data(
            self.problem.analysis().offsets().clone(),
            self.problem.analysis().dims().components,
            self.problem.analysis().apply_vec(x),
        );
        self.aux.seminorm(&field)
    }

    pub(crate) fn finish(mut self, converged: bool, solution: Vec<f64>) -> Result<(MultiComponentImage, SolverTrace)> {
        self.trace.elapsed = self.seconds();
        self.trace.converged = converged;
        if !converged {
            log::warn!(
                "stopped after {} iterations without reaching relative change {:e}",
                self.trace.iterations,
                self.cfg.stop_tol
            );
        }
        let image = self.problem.image(solution)?;
        Ok((image, self.trace))
    }
}
