//! Experiment orchestration: seeded multi-run execution, greedy-policy
//! evaluation, normalized scoring, windowed reporting, and CSV metrics
//! persistence.

mod evaluate;
mod experiment;
mod metrics;
mod presets;

pub use evaluate::{
    evaluate_policy, measure_anchors, normalized_score, steps_to_threshold, window_start,
    windowed_score, EvalPoint, EvalReport, ScoreAnchors, ANCHOR_SEED, SMOOTHING_WINDOW,
};
pub use experiment::{
    aggregate_report, dataset_content_hash, resolve_dataset, run_experiment, run_single,
    DatasetSource, EnvConfig, ExperimentConfig, ExperimentOutcome, SeedOutcome, SeedRun,
};
pub use metrics::{
    read_metrics, records_to_csv, strip_wall_clock, write_metrics, MetricsRecord, CSV_HEADER,
};
pub use presets::{preset, preset_names};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Agent(#[from] crate::agents::AgentError),
    #[error(transparent)]
    Env(#[from] crate::envs::EnvError),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io failure on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid experiment configuration: {0}")]
    BadConfig(String),
    #[error("score anchors are degenerate (random {random}, expert {expert}); need expert > random")]
    DegenerateAnchors { random: f64, expert: f64 },
    #[error("malformed metrics CSV at line {line}: {reason}")]
    BadCsv { line: usize, reason: String },
    #[error("unknown experiment preset {0:?}")]
    UnknownPreset(String),
    #[error("every seed failed; first error: {0}")]
    AllSeedsFailed(String),
}
