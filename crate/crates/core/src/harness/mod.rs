//! Experiment orchestration: configuration, the run loop, logs and sweeps.

pub mod config;
pub mod run;
pub mod setup;
pub mod sweep;

pub use config::{preset, ExperimentConfig, WeightingKind, PRESETS};
pub use run::{run_experiment, run_observed, LogRow, Phase, RunLog};
pub use sweep::{sweep, SweepSummary};
