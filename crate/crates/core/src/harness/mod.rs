//! Config ingestion, run orchestration and reproducible on-disk outputs.

mod commands;
mod config;
mod output;

pub use commands::{compare, evaluate, generate_scenario, run, Audits, CompareOutcome, CurveReport, RunManifest, RunOutcome};
pub use config::{
    load_config, parse_config, resolve, EvaluationSection, LoadedConfig, RunConfig, ScenarioDef, ScenarioSection,
    SCHEMA_VERSION,
};
pub use output::{
    deliveries_csv, observations_csv, output_dir, plans_csv, read_scenario_manifest, ScenarioManifest,
    DELIVERY_HEADER, INCOMPLETE_MARKER, MANIFEST, OBSERVATION_HEADER, OUT_ROOT_ENV, PLAN_HEADER, SCENARIO_MANIFEST,
};

use std::fmt::Display;
use std::path::PathBuf;

use thiserror::Error;

use crate::evaluation::EvaluationError;
use crate::executive::ExecutiveError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at {at}: {msg}")]
    Config { at: String, msg: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Executive(ExecutiveError),
    #[error(transparent)]
    Evaluation(EvaluationError),
    #[error("scenario mismatch: {0}")]
    Mismatch(String),
}

impl HarnessError {
    pub fn config(at: impl Display, msg: impl Display) -> Self {
        HarnessError::Config { at: at.to_string(), msg: msg.to_string() }
    }

    /// Process exit status: 2 config, 3 runtime, 4 scenario mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } => 2,
            HarnessError::Mismatch(_) => 4,
            _ => 3,
        }
    }
}

impl From<ExecutiveError> for HarnessError {
    fn from(e: ExecutiveError) -> Self {
        match e {
            ExecutiveError::Config(m) => HarnessError::config("executive", m),
            e => HarnessError::Executive(e),
        }
    }
}

impl From<EvaluationError> for HarnessError {
    fn from(e: EvaluationError) -> Self {
        match e {
            EvaluationError::ScenarioMismatch(a, b) => HarnessError::Mismatch(format!("{a} vs {b}")),
            EvaluationError::TooFewRuns(n) => HarnessError::config("compare", format!("needs at least two configs, got {n}")),
            e => HarnessError::Evaluation(e),
        }
    }
}
