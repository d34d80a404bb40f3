use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::{EtaPolicy, ExperimentConfig};
use super::degrade::degrade;
use super::io::{read_image, read_observation, write_image, write_observation, ImageFormat};
use super::metrics::MetricsReport;
use crate::error::{Error, Result};
use crate::image::{DegradedObservation, MultiComponentImage};
use crate::nlweights::{bootstrap_config, bootstrap_estimate, build_graph, read_graph, write_graph, NeighborhoodGraph};
use crate::operators::{AnalysisOperator, DegradationOperator, Regularizer};
use crate::projections::{ConstraintSpec, EpiAuxiliary, Schatten};
use crate::solvers::{relative_error_trace, ConstraintMode, ProblemInstance, SolverConfig, SolverKind, SolverTrace};

pub const OBSERVATION_FILE: &str = "observation.obs";
pub const TRUTH_FILE: &str = "truth.bsq";
pub const GRAPH_FILE: &str = "graph.bin";
pub const RESTORED_FILE: &str = "restored.bsq";
pub const RESTORED_PPM_FILE: &str = "restored.ppm";
pub const TRACE_FILE: &str = "trace.csv";
pub const REPORT_CSV_FILE: &str = "report.csv";
pub const REPORT_TXT_FILE: &str = "report.txt";
pub const RELERR_FILE: &str = "relerr.csv";
pub const BENCH_FILE: &str = "bench.csv";

/// Rescale every band affinely onto `[0, 255]`; constant bands become 0.
pub fn normalize(x: &mut MultiComponentImage) {
    for r in 0..x.components() {
        let band = x.band_mut(r);
        let (lo, hi) = band
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if hi > lo {
            let scale = 255.0 / (hi - lo);
            band.iter_mut().for_each(|v| *v = (*v - lo) * scale);
        } else {
            band.fill(0.0);
        }
    }
}

/// `g(x) = Σ_ℓ ‖(Φx)^(ℓ)‖_p` with unit weights.
pub fn seminorm(phi: &AnalysisOperator, norm: Schatten, x: &MultiComponentImage) -> Result<f64> {
    let field = phi.analyze(x)?;
    let unit = ConstraintSpec::new(norm, 1.0, crate::image::BoxConstraint::eight_bit())?;
    EpiAuxiliary::for_field(&field, phi.coupling(), &unit)?.seminorm(&field)
}

/// Ground truth (normalized) and the observation to restore.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub truth: Option<MultiComponentImage>,
    pub observation: DegradedObservation,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let truth = match (&cfg.input, cfg.input_format()?) {
        (Some(path), Some(format)) => {
            let mut x = read_image(path, format)?;
            normalize(&mut x);
            Some(x)
        }
        _ => None,
    };
    let observation = match (&cfg.observation, &truth) {
        (Some(path), _) => read_observation(path)?,
        (None, Some(x)) => degrade(x, &cfg.scenario, cfg.seed)?,
        (None, None) => unreachable!("validate requires input or observation"),
    };
    if let Some(x) = &truth {
        if x.dims() != observation.dims {
            return Err(Error::Dimension(format!(
                "ground truth is {:?}, observation is {:?}",
                x.dims(),
                observation.dims
            )));
        }
    }
    Ok(Prepared { truth, observation })
}

/// The assembled problem and how its bound was obtained.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub problem: ProblemInstance,
    pub eta: f64,
    pub graph: Option<NeighborhoodGraph>,
}

/// Build `A`, `Φ` (with its graph for the non-local variants) and the
/// constraint. A freshly computed graph is cached in `out_dir`.
pub fn assemble(cfg: &ExperimentConfig, prepared: &Prepared, out_dir: Option<&Path>) -> Result<Assembled> {
    let obs = &prepared.observation;
    let a = DegradationOperator::for_observation(obs)?;
    let bounds = cfg.constraint.bounds()?;
    let policy = cfg.constraint.policy(prepared.truth.is_some())?;
    let norm = cfg.regularizer.norm;
    let kind = cfg.regularizer.kind;

    let graph = if !kind.is_nonlocal() {
        None
    } else if let Some(path) = &cfg.regularizer.graph {
        Some(read_graph(path)?)
    } else {
        let eta_boot = match (cfg.constraint.bootstrap_eta, policy, &prepared.truth) {
            (Some(e), _, _) => e,
            (None, EtaPolicy::Ratio(r), Some(x)) => r * seminorm(&AnalysisOperator::tv(Regularizer::StTv, obs.dims), norm, x)?,
            _ => {
                return Err(Error::Config(
                    "non-local runs with an absolute eta need bootstrap_eta or a graph file".into(),
                ))
            }
        };
        let spec = ConstraintSpec::new(norm, eta_boot, bounds)?;
        let boot_cfg = SolverConfig {
            mode: ConstraintMode::Epigraphical,
            keep_iterates: false,
            timing: false,
            ..bootstrap_config(&cfg.solver)
        };
        log::info!("bootstrap ST-TV estimate with eta = {eta_boot}");
        let estimate = bootstrap_estimate(&obs.measurements, &a, &spec, &boot_cfg)?;
        let graph = build_graph(&estimate, &cfg.regularizer.patch_spec()?)?;
        log::info!("graph with {} edges", graph.edges());
        if let Some(dir) = out_dir {
            write_graph(&dir.join(GRAPH_FILE), &graph)?;
        }
        Some(graph)
    };

    let phi = AnalysisOperator::new(kind, obs.dims, graph.as_ref())?;
    let eta = match (policy, &prepared.truth) {
        (EtaPolicy::Absolute(e), _) => e,
        (EtaPolicy::Ratio(r), Some(x)) => r * seminorm(&phi, norm, x)?,
        (EtaPolicy::Ratio(_), None) => unreachable!("policy requires a ground truth for ratios"),
    };
    let constraint = ConstraintSpec::new(norm, eta, bounds)?;
    let problem = ProblemInstance::new(obs.measurements.clone(), a, phi, constraint)?;
    Ok(Assembled { problem, eta, graph })
}

/// Result of one restoration.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub estimate: MultiComponentImage,
    pub trace: SolverTrace,
    pub eta: f64,
    pub seconds: f64,
    /// Present when a ground truth was available.
    pub report: Option<MetricsReport>,
}

/// Solve `problem` with `kind`, timing the call.
pub fn solve(
    problem: &ProblemInstance,
    kind: SolverKind,
    cfg: &SolverConfig,
    truth: Option<&MultiComponentImage>,
    eta: f64,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let (estimate, trace) = kind.solve(problem, cfg)?;
    let seconds = start.elapsed().as_secs_f64();
    let report = truth
        .map(|x| MetricsReport::new(&estimate, x, seconds, trace.iterations()))
        .transpose()?;
    Ok(RunOutcome {
        estimate,
        trace,
        eta,
        seconds,
        report,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Simulate the acquisition and store `observation.obs` and the normalized
/// `truth.bsq` in the output directory.
pub fn run_degrade(cfg: &ExperimentConfig) -> Result<Prepared> {
    let prepared = prepare(cfg)?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    write_observation(&dir.join(OBSERVATION_FILE), &prepared.observation)?;
    if let Some(x) = &prepared.truth {
        write_image(&dir.join(TRUTH_FILE), x, ImageFormat::Bsq)?;
    }
    Ok(prepared)
}

/// Full restoration: prepare, assemble, solve, write the restored image,
/// `trace.csv`, `report.csv` (with a ground truth) and `report.txt`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let prepared = prepare(cfg)?;
    let assembled = assemble(cfg, &prepared, Some(dir))?;
    log::info!("{} with {} (eta = {})", cfg.regularizer.kind, cfg.algorithm, assembled.eta);
    let outcome = solve(&assembled.problem, cfg.algorithm, &cfg.solver, prepared.truth.as_ref(), assembled.eta)?;
    write_outputs(dir, cfg, &outcome)?;
    Ok(outcome)
}

fn write_outputs(dir: &Path, cfg: &ExperimentConfig, outcome: &RunOutcome) -> Result<()> {
    write_image(&dir.join(RESTORED_FILE), &outcome.estimate, ImageFormat::Bsq)?;
    if outcome.estimate.components() == 3 {
        write_image(&dir.join(RESTORED_PPM_FILE), &outcome.estimate, ImageFormat::Ppm)?;
    }
    outcome.trace.save_csv(&dir.join(TRACE_FILE))?;
    if let Some(report) = &outcome.report {
        write_text(&dir.join(REPORT_CSV_FILE), &report.to_csv())?;
    }
    write_text(&dir.join(REPORT_TXT_FILE), &summary(cfg, outcome))
}

fn summary(cfg: &ExperimentConfig, outcome: &RunOutcome) -> String {
    let mut s = String::new();
    let t = &outcome.trace;
    writeln!(s, "regularizer: {} (p = {})", cfg.regularizer.kind, cfg.regularizer.norm).unwrap();
    writeln!(s, "solver: {} ({})", cfg.algorithm, cfg.solver.mode).unwrap();
    match cfg.constraint.eta_ratio.filter(|_| cfg.constraint.eta.is_none()) {
        Some(r) => writeln!(s, "eta: {} ({r} x ground truth)", outcome.eta).unwrap(),
        None => writeln!(s, "eta: {}", outcome.eta).unwrap(),
    }
    writeln!(s, "iterations: {}", t.iterations()).unwrap();
    writeln!(s, "converged: {}", t.converged()).unwrap();
    if let Some(last) = t.last() {
        writeln!(s, "final relative change: {:e}", last.rel_change).unwrap();
        writeln!(s, "final feasibility gap: {:e}", last.feasibility_gap).unwrap();
    }
    writeln!(s, "seconds: {:.3}", outcome.seconds).unwrap();
    if let Some(r) = &outcome.report {
        writeln!(s, "snr_db: {:.4}", r.snr).unwrap();
        writeln!(s, "msnr_db: {:.4}", r.msnr).unwrap();
    }
    s
}

#[derive(Debug, Clone, Serialize)]
struct RelErrRow {
    solver: SolverKind,
    mode: ConstraintMode,
    iter: usize,
    seconds: Option<f64>,
    rel_error: f64,
}

fn write_relerr(path: &Path, rows: &[RelErrRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn relerr_rows(outcome: &RunOutcome, solver: SolverKind, mode: ConstraintMode) -> Result<Vec<RelErrRow>> {
    Ok(relative_error_trace(&outcome.trace, outcome.estimate.data())?
        .into_iter()
        .map(|p| RelErrRow {
            solver,
            mode,
            iter: p.iter,
            seconds: p.seconds,
            rel_error: p.rel_error,
        })
        .collect())
}

/// Like [`run_experiment`] but with per-iteration timing and the iterates
/// kept, adding `relerr.csv`: the distance of every logged iterate to the
/// final one.
pub fn run_trace(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let mut cfg = cfg.clone();
    cfg.solver.timing = true;
    cfg.solver.keep_iterates = true;
    let outcome = run_experiment(&cfg)?;
    let rows = relerr_rows(&outcome, cfg.algorithm, cfg.solver.mode)?;
    write_relerr(&cfg.output_dir.join(RELERR_FILE), &rows)?;
    Ok(outcome)
}

/// One line of `bench.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub solver: SolverKind,
    pub mode: ConstraintMode,
    pub iterations: usize,
    pub converged: bool,
    pub seconds: f64,
    pub snr_db: Option<f64>,
    pub msnr_db: Option<f64>,
}

/// Every solver in both constraint modes on one assembled problem.
/// `p = ∞` has no direct projector and is benchmarked in epigraphical mode
/// only.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<Vec<BenchRow>> {
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let prepared = prepare(cfg)?;
    let assembled = assemble(cfg, &prepared, Some(dir))?;
    let modes: &[ConstraintMode] = if cfg.regularizer.norm == Schatten::Inf {
        &[ConstraintMode::Epigraphical]
    } else {
        &[ConstraintMode::Epigraphical, ConstraintMode::Direct]
    };
    let mut rows = Vec::new();
    let mut relerr = Vec::new();
    for solver in [SolverKind::Mlfbf, SolverKind::Sdmm] {
        for &mode in modes {
            let scfg = SolverConfig {
                mode,
                timing: true,
                keep_iterates: true,
                ..cfg.solver.clone()
            };
            let outcome = solve(&assembled.problem, solver, &scfg, prepared.truth.as_ref(), assembled.eta)?;
            log::info!("{solver} {mode}: {} iterations, {:.3} s", outcome.trace.iterations(), outcome.seconds);
            relerr.extend(relerr_rows(&outcome, solver, mode)?);
            rows.push(BenchRow {
                solver,
                mode,
                iterations: outcome.trace.iterations(),
                converged: outcome.trace.converged(),
                seconds: outcome.seconds,
                snr_db: outcome.report.as_ref().map(|r| r.snr),
                msnr_db: outcome.report.as_ref().map(|r| r.msnr),
            });
        }
    }
    let path = dir.join(BENCH_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for r in &rows {
        w.serialize(r).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    write_relerr(&dir.join(RELERR_FILE), &relerr)?;
    Ok(rows)
}
