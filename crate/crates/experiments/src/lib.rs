//! Experiment orchestration for rank-guided super-resolution: declarative
//! TOML configs, the metric-rank vs model-classification upper bound,
//! evaluation tables, plots with plain-data sidecars and the resumable
//! staged pipeline behind the `ranksr` CLI.

pub mod config;
mod error;
pub mod eval;
pub mod pipeline;
pub mod plots;
pub mod rankset;
pub mod upper_bound;

pub use crate::config::ExperimentConfig;
pub use crate::error::{ExpError, Result};
pub use crate::eval::{evaluate_suite, EvalCell, EvalOptions, EvalRow, EvalTable, Method};
pub use crate::pipeline::{run_pipeline, PipelineOutcome};
pub use crate::upper_bound::{upper_bound, upper_bound_scores, Better, UpperBound};
