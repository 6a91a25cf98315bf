//! Experiment driver for `idslab-core`: JSON configs, deterministic CSV/JSON
//! artifacts and the `verify` suite.

pub mod config;
pub mod experiments;
pub mod output;
pub mod verify;

pub use config::{ConfigError, ExperimentConfig, Resolved};
pub use experiments::NumericError;
