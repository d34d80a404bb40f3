use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::degrade::Scenario;
use super::io::ImageFormat;
use crate::error::{Error, Result};
use crate::image::BoxConstraint;
use crate::nlweights::PatchSpec;
use crate::operators::Regularizer;
use crate::projections::Schatten;
use crate::solvers::{SolverConfig, SolverKind};

/// One restoration experiment, read from TOML.
///
/// ```toml
/// input = "cube.bsq"
/// output_dir = "out"
/// seed = 7
/// algorithm = "mlfbf"
///
/// [scenario]
/// noise_std = 5.0
/// blur = 3
/// decimation = 0.9
///
/// [regularizer]
/// kind = "st-nltv"
/// norm = 1
///
/// [constraint]
/// eta_ratio = 0.4
///
/// [solver]
/// stop_tol = 1e-5
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Ground-truth image; degraded unless `observation` is given.
    pub input: Option<PathBuf>,
    /// Format of `input`, inferred from the extension when absent.
    pub format: Option<ImageFormat>,
    /// A stored observation to restore instead of simulating one.
    pub observation: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Seed of masks and noise.
    pub seed: u64,
    pub algorithm: SolverKind,
    pub scenario: Scenario,
    pub regularizer: RegularizerConfig,
    pub constraint: ConstraintConfig,
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            input: None,
            format: None,
            observation: None,
            output_dir: PathBuf::from("out"),
            seed: 0,
            algorithm: SolverKind::Mlfbf,
            scenario: Scenario::default(),
            regularizer: RegularizerConfig::default(),
            constraint: ConstraintConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularizerConfig {
    pub kind: Regularizer,
    pub norm: Schatten,
    pub patch: usize,
    pub delta: f64,
    pub search: usize,
    pub max_neighbors: usize,
    /// Defaults to `(patch − 1) / 4`.
    pub gaussian_std: Option<f64>,
    /// Precomputed neighbourhood graph; built from a bootstrap estimate
    /// otherwise.
    pub graph: Option<PathBuf>,
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        let p = PatchSpec::default();
        Self {
            kind: Regularizer::StNltv,
            norm: Schatten::One,
            patch: p.patch,
            delta: p.delta,
            search: p.search,
            max_neighbors: p.max_neighbors,
            gaussian_std: None,
            graph: None,
        }
    }
}

impl RegularizerConfig {
    pub fn patch_spec(&self) -> Result<PatchSpec> {
        let mut spec = PatchSpec::new(self.patch, self.delta, self.search, self.max_neighbors)?;
        if let Some(std) = self.gaussian_std {
            spec.gaussian_std = std;
            spec.validate()?;
        }
        Ok(spec)
    }
}

/// The bound `η` is either absolute or a multiple of the regularizer's
/// value on the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintConfig {
    pub eta: Option<f64>,
    pub eta_ratio: Option<f64>,
    /// Absolute ST-TV bound of the bootstrap estimate, needed for NLTV runs
    /// with an absolute `eta`. With `eta_ratio` the bootstrap uses the same
    /// ratio of the ground-truth ST-TV value.
    pub bootstrap_eta: Option<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        Self {
            eta: None,
            eta_ratio: None,
            bootstrap_eta: None,
            lo: 0.0,
            hi: 255.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaPolicy {
    Absolute(f64),
    Ratio(f64),
}

impl ConstraintConfig {
    /// Absolute `eta` wins over `eta_ratio`; with neither, the ratio 0.4 is
    /// used when a ground truth is available.
    pub fn policy(&self, has_truth: bool) -> Result<EtaPolicy> {
        let check = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        match (self.eta, self.eta_ratio) {
            (Some(eta), _) => Ok(EtaPolicy::Absolute(check("eta", eta)?)),
            (None, Some(r)) if has_truth => Ok(EtaPolicy::Ratio(check("eta_ratio", r)?)),
            (None, None) if has_truth => Ok(EtaPolicy::Ratio(0.4)),
            _ => Err(Error::Config(
                "without a ground-truth image the bound must be given as an absolute eta".into(),
            )),
        }
    }

    pub fn bounds(&self) -> Result<BoxConstraint> {
        BoxConstraint::new(self.lo, self.hi).map_err(|e| Error::Config(e.to_string()))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn input_format(&self) -> Result<Option<ImageFormat>> {
        match (&self.input, self.format) {
            (_, Some(f)) => Ok(Some(f)),
            (Some(p), None) => ImageFormat::from_path(p).map(Some),
            (None, None) => Ok(None),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.is_none() && self.observation.is_none() {
            return Err(Error::Config("either input or observation must be set".into()));
        }
        self.scenario.validate()?;
        self.regularizer.patch_spec()?;
        self.constraint.bounds()?;
        self.constraint.policy(self.input.is_some())?;
        self.solver.validate()?;
        self.input_format()?;
        Ok(())
    }
}
