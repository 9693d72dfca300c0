//! Experiment runner for `empl-core`: config and checkpoint files, CSV
//! formats, SVG figures and the `empl` command line.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod run;
pub mod svg;

pub use checkpoint::Checkpoint;
pub use config::{EvalConfig, ExperimentConfig, ExperimentKind};
pub use error::CliError;
