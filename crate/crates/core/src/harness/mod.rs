//! Experiment orchestration: config ingestion, deterministic parallel
//! execution, CSV and manifest persistence, plot scripts.

pub mod config;
pub mod output;
pub mod plots;
pub mod run;
mod runners;

pub use config::{DomainSpec, ExperimentSpec, RunConfig, CONFIG_VERSION};
pub use output::{Check, ExperimentOutput, ManifestEntry, Row, RunManifest, MANIFEST_FILE};
pub use plots::{emit_plots, PlotReport};
pub use run::{experiment_seed, run, RunOptions, RunSummary};
pub use runners::run_experiment;
