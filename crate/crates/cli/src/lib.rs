//! Experiment runner around the simulation engine: Iris ingestion,
//! configuration, orchestration, and reproducible run records.
//!
//! Every run is fully determined by its resolved config (including the
//! seed); rerunning a recorded config reproduces the metrics CSV byte for
//! byte.

pub mod config;
pub mod dataset;
pub mod records;
pub mod runner;

pub use config::{ExperimentKind, RunConfig};
pub use runner::run;
