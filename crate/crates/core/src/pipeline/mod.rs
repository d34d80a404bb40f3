//! Experiment driver: image files, simulated acquisition, metrics,
//! configuration and the restore/bench/trace runs behind the CLI.

pub mod config;
pub mod degrade;
pub mod experiment;
pub mod io;
pub mod metrics;

pub use config::{ConstraintConfig, EtaPolicy, ExperimentConfig, RegularizerConfig};
pub use degrade::{degrade, kept_count, Scenario};
pub use experiment::{normalize, run_bench, run_degrade, run_experiment, run_trace, RunOutcome};
pub use io::{read_image, read_observation, write_image, write_observation, ImageFormat};
pub use metrics::{snr, MetricsReport};
