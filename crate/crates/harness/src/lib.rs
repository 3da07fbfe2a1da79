//! Std companion to `semexp-core`: configuration files, the SQD1 dataset
//! and SQM1 checkpoint formats, training-log CSVs, run directories,
//! ablation sweeps, comparison reports and the `semexp` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod logs;
pub mod pipeline;
pub mod report;

pub use error::{HarnessError, Result};
