//! Gradient-quality metrics, experiment configuration, and the
//! multi-seed runner behind the CLI.

pub mod config;
pub mod metrics;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentKind};
pub use metrics::{cosine_distance, mean_and_ci95, rel_abs_error, GradReport};
pub use runner::{run_experiment, RunArtifacts};
