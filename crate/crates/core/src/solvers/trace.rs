use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{distance, norm2};

/// One logged iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iter: usize,
    /// Cumulative solver time; absent when timing is disabled.
    pub seconds: Option<f64>,
    /// `‖x^{t+1} − x^t‖ / ‖x^t‖`.
    pub rel_change: f64,
    /// `g(x̂) − η` for the current estimate `x̂`.
    pub feasibility_gap: f64,
    /// `‖A x̂ − z‖²`.
    pub fidelity: f64,
}

/// Convergence history of a solver run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverTrace {
    pub(crate) records: Vec<TraceRecord>,
    pub(crate) iterates: Vec<(usize, Vec<f64>)>,
    pub(crate) iterations: usize,
    pub(crate) converged: bool,
    pub(crate) elapsed: f64,
    pub(crate) step: f64,
}

impl SolverTrace {
    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    /// Logged estimates, kept only when requested in the solver config.
    pub fn iterates(&self) -> &[(usize, Vec<f64>)] {
        &self.iterates
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Wall-clock seconds spent in the solver, excluding trace bookkeeping.
    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    /// The constant step `γ` used by the run.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r).map_err(csv_error)?;
        }
        w.flush().map_err(|e| Error::io("writing trace", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("writing CSV", io),
        other => Error::Contract(format!("CSV serialization failed: {other:?}")),
    }
}

/// A point of the `‖x^{[i]} − x^{[∞]}‖ / ‖x^{[∞]}‖` curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelativeErrorPoint {
    pub iter: usize,
    pub seconds: Option<f64>,
    pub rel_error: f64,
}

/// Relative distance of every logged iterate of `trace` to `x_ref`.
pub fn relative_error_trace(trace: &SolverTrace, x_ref: &[f64]) -> Result<Vec<RelativeErrorPoint>> {
    let scale = norm2(x_ref);
    if scale == 0.0 {
        return Err(Error::Contract("reference solution is zero".into()));
    }
    trace
        .iterates
        .iter()
        .map(|(iter, x)| {
            if x.len() != x_ref.len() {
                return Err(Error::Dimension(format!(
                    "iterate has {} entries, reference has {}",
                    x.len(),
                    x_ref.len()
                )));
            }
            let seconds = trace.records.iter().find(|r| r.iter == *iter).and_then(|r| r.seconds);
            Ok(RelativeErrorPoint {
                iter: *iter,
                seconds,
                rel_error: distance(x, x_ref) / scale,
            })
        })
        .collect()
}
