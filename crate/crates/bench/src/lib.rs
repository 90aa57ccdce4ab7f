//! Benchmark harness for hierarchical control of a greenhouse mobile robot.
//!
//! Three categories exercise increasing levels of the stack:
//! 1. wheel-speed tracking of a fixed profile by the low-level controller,
//! 2. waypoint tracking by the receding-horizon tracker,
//! 3. global planning with periodic replanning.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use thiserror::Error;

pub mod cli;
pub mod config;
pub mod export;
pub mod matrix;
pub mod plugins;
pub mod scenario;

pub use config::ScenarioConfig;
pub use export::export_csv;
pub use matrix::{run_matrix, run_trials, AggregateTable};
pub use plugins::PluginSet;
pub use scenario::{run_category1, run_category2, run_category3, TrialFailure, TrialOutcome};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Params { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    World(#[from] greenbench_core::world::WorldError),
    #[error("controller setup failed: {0}")]
    Control(String),
    #[error(transparent)]
    Metrics(#[from] greenbench_core::metrics::MetricsError),
}
