use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stnltv::pipeline::{self, ExperimentConfig, ImageFormat};
use stnltv::projections::Schatten;
use stnltv::solvers::{ConstraintMode, SolverKind};
use stnltv::{Error, Regularizer};

/// Constrained restoration of multicomponent images with structure-tensor
/// (non-local) total variation.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate blur, decimation and noise; writes observation.obs and truth.bsq.
    Degrade(Overrides),
    /// Restore an image; writes restored.bsq, trace.csv, report.csv, report.txt.
    Restore(Overrides),
    /// Both solvers in both constraint modes; writes bench.csv and relerr.csv.
    Bench(Overrides),
    /// Restore with timing and kept iterates; adds relerr.csv.
    Trace(Overrides),
}

/// Flags override the values of the TOML file given with `--config`.
#[derive(Args)]
struct Overrides {
    /// TOML experiment file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    format: Option<ImageFormat>,
    #[arg(long)]
    observation: Option<PathBuf>,
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    blur: Option<usize>,
    #[arg(long)]
    decimation: Option<f64>,
    /// st-tv, st-nltv, cc-tv or cc-nltv.
    #[arg(long)]
    regularizer: Option<Regularizer>,
    /// 1, 2 or inf.
    #[arg(long)]
    norm: Option<Schatten>,
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    search: Option<usize>,
    #[arg(long)]
    max_neighbors: Option<usize>,
    #[arg(long)]
    gaussian_std: Option<f64>,
    /// Precomputed neighbourhood graph.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    eta_ratio: Option<f64>,
    #[arg(long)]
    bootstrap_eta: Option<f64>,
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long)]
    hi: Option<f64>,
    /// mlfbf or sdmm.
    #[arg(long)]
    algorithm: Option<SolverKind>,
    /// epigraphical or direct.
    #[arg(long)]
    mode: Option<ConstraintMode>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    stop_tol: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    solver_seed: Option<u64>,
    #[arg(long)]
    sdmm_gamma: Option<f64>,
    #[arg(long)]
    cg_tol: Option<f64>,
    #[arg(long)]
    cg_max_iter: Option<usize>,
    #[arg(long)]
    norm_tol: Option<f64>,
    #[arg(long)]
    norm_max_iter: Option<usize>,
    #[arg(long)]
    log_every: Option<usize>,
    #[arg(long)]
    keep_iterates: bool,
    #[arg(long)]
    timing: bool,
}

macro_rules! apply {
    ($src:ident => $($dst:expr => $field:ident),* $(,)?) => {
        $(if let Some(v) = $src.$field.clone() { $dst = v; })*
    };
}

impl Overrides {
    fn resolve(&self) -> stnltv::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let o = self;
        apply!(o =>
            cfg.output_dir => output_dir,
            cfg.seed => seed,
            cfg.scenario.noise_std => noise_std,
            cfg.scenario.blur => blur,
            cfg.scenario.decimation => decimation,
            cfg.regularizer.kind => regularizer,
            cfg.regularizer.norm => norm,
            cfg.regularizer.patch => patch,
            cfg.regularizer.delta => delta,
            cfg.regularizer.search => search,
            cfg.regularizer.max_neighbors => max_neighbors,
            cfg.constraint.lo => lo,
            cfg.constraint.hi => hi,
            cfg.algorithm => algorithm,
            cfg.solver.mode => mode,
            cfg.solver.max_iter => max_iter,
            cfg.solver.stop_tol => stop_tol,
            cfg.solver.epsilon => epsilon,
            cfg.solver.seed => solver_seed,
            cfg.solver.sdmm_gamma => sdmm_gamma,
            cfg.solver.cg_tol => cg_tol,
            cfg.solver.cg_max_iter => cg_max_iter,
            cfg.solver.norm_tol => norm_tol,
            cfg.solver.norm_max_iter => norm_max_iter,
        );
        let optional = |flag: &Option<PathBuf>, slot: &mut Option<PathBuf>| {
            if flag.is_some() {
                *slot = flag.clone();
            }
        };
        optional(&o.input, &mut cfg.input);
        optional(&o.observation, &mut cfg.observation);
        optional(&o.graph, &mut cfg.regularizer.graph);
        cfg.format = o.format.or(cfg.format);
        cfg.regularizer.gaussian_std = o.gaussian_std.or(cfg.regularizer.gaussian_std);
        cfg.solver.log_every = o.log_every.or(cfg.solver.log_every);
        // an absolute bound on the command line replaces a ratio from the file and vice versa
        if o.eta.is_some() {
            cfg.constraint.eta = o.eta;
            cfg.constraint.eta_ratio = None;
        }
        if o.eta_ratio.is_some() {
            cfg.constraint.eta_ratio = o.eta_ratio;
            cfg.constraint.eta = None;
        }
        cfg.constraint.bootstrap_eta = o.bootstrap_eta.or(cfg.constraint.bootstrap_eta);
        cfg.solver.keep_iterates |= o.keep_iterates;
        cfg.solver.timing |= o.timing;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(command: Command) -> stnltv::Result<()> {
    match command {
        Command::Degrade(o) => {
            let cfg = o.resolve()?;
            let p = pipeline::run_degrade(&cfg)?;
            println!(
                "kept {} of {} samples per band; wrote {}",
                p.observation.kept(),
                p.observation.dims.pixels(),
                cfg.output_dir.display()
            );
        }
        Command::Restore(o) => {
            let cfg = o.resolve()?;
            print_outcome(&pipeline::run_experiment(&cfg)?);
        }
        Command::Trace(o) => {
            let cfg = o.resolve()?;
            print_outcome(&pipeline::run_trace(&cfg)?);
        }
        Command::Bench(o) => {
            let cfg = o.resolve()?;
            for row in pipeline::run_bench(&cfg)? {
                println!(
                    "{:>5} {:<12} {:>6} iterations {:>9.3} s{}",
                    row.solver.to_string(),
                    row.mode.to_string(),
                    row.iterations,
                    row.seconds,
                    row.snr_db.map(|s| format!("  SNR {s:.2} dB")).unwrap_or_default()
                );
            }
        }
    }
    Ok(())
}

fn print_outcome(out: &pipeline::RunOutcome) {
    print!(
        "eta {:.6e}, {} iterations ({}), {:.3} s",
        out.eta,
        out.trace.iterations(),
        if out.trace.converged() { "converged" } else { "iteration cap" },
        out.seconds
    );
    match &out.report {
        Some(r) => println!(", SNR {:.2} dB, M-SNR {:.2} dB", r.snr, r.msnr),
        None => println!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Divergence { trace, .. } = &e {
                eprintln!("last record: {:?}", trace.last());
            }
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
