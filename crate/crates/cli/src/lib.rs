//! Experiment runner: config parsing, optimizer comparisons, diagnostics,
//! bound checks and benchmarks, with checksummed outputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod runner;

pub use config::{ExperimentKind, RunConfig, WorkloadConfig, SEED_ENV};
pub use error::{LabError, Result};
pub use runner::{run, Report, RunOptions, RunOutcome};
