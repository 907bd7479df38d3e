//! Configuration, seeding and batch execution of experiments.

mod config;
mod run;

pub use config::{default_delta, default_eps, Experiment, ExperimentConfig, Format};
pub use run::{rerun, run, FileRecord, OccupationRow, RunManifest, SeedRecord, MANIFEST_FILE};
