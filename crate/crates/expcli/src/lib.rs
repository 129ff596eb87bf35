//! Experiment runner for the 1D hydrate consolidation benchmark: TOML
//! configuration, the scheme/order/multirate matrix, error metrics, and
//! deterministic CSV output.

pub mod compare;
pub mod config;
pub mod metrics;
pub mod runner;
pub mod trajectory;

pub use config::{ConfigError, ExperimentConfig};
pub use metrics::{l2_error, relative_error, Field, MetricError, Profile};
pub use runner::{execute, run_experiment, write_outputs, RunId, RunRecord, Role, Sweep};
