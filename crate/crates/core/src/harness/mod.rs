//! Replication harness: configuration, seeded parallel runs, summary
//! statistics, Bellman-error evaluation and CSV output.

pub mod batch;
pub mod bellman;
pub mod check;
pub mod config;
pub mod experiment;
pub mod output;
pub mod stats;

pub use config::{AlgorithmKind, ExperimentConfig, KeyValues, ModelConfig};
pub use experiment::{run_experiment, ExperimentResult, ReplicaRow, Status};
