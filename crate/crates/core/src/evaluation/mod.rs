//! Scoring of executed observations against truth, predictor error curves
//! and side-by-side comparison of runs.

mod compare;
mod error_curve;
mod metrics;

pub use compare::{compare_runs, write_comparison_csv, Comparison, ComparisonRow};
pub use error_curve::{predictor_error_curve, ErrorCell, ErrorCurve, ErrorGrid};
pub use metrics::{category_counts, run_metrics, total_flood_magnitude, CategoryCounts, CategoryThresholds, EvalOptions, RunMetrics};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvaluationError {
    #[error("error grid is empty")]
    EmptyGrid,
    #[error("comparison needs at least two runs, got {0}")]
    TooFewRuns(usize),
    #[error("runs use different scenarios: {0} vs {1}")]
    ScenarioMismatch(String, String),
    #[error("csv: {0}")]
    Csv(String),
}
