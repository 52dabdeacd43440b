//! Experiment harness: datasets, simulation, corruption, metrics and reports.

pub mod config;
pub mod corrupt;
pub mod dataset;
pub mod experiment;
pub mod metrics;
pub mod report;
pub mod simulate;

pub use config::ExperimentConfig;
pub use corrupt::{corrupt, CorruptionSpec, Corrupted};
pub use dataset::{load_dataset, write_dataset, DataError, Dataset, DatasetSummary, GroundTruthRecord};
pub use experiment::{run_experiment, run_track, HarnessError, RunOutput, RunReport, TrackReport};
pub use metrics::{improvement, mrmse, vrmse, vrmse_avg};
pub use simulate::{simulate_trajectory, Segment, TrajectorySpec};
