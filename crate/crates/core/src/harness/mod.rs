//! Datasets, the experiment sweep and width diagnostics.

pub mod datasets;
pub mod experiment;
pub mod mnist;
pub mod width;

pub use experiment::{run_experiment, DatasetSpec, EnsemblePolicy, ExperimentConfig, ResultRow};
