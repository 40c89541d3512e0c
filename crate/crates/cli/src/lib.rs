//! Config-driven experiments on top of `shsa-core`: TOML configs, JSON and
//! CSV reports, a rayon executor and the workflows behind the `shsa` binary.

#![deny(missing_debug_implementations)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod exec;
pub mod report;
pub mod run;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use exec::Rayon;
pub use report::ExperimentReport;
pub use run::{sample_sizes, validate_solution, RunOutput, Runner};
