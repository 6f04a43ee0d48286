use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{EvaluationError, RunMetrics};
use crate::executive::Mode;
use crate::types::Time;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub mode: Mode,
    pub agile: bool,
    pub plan_horizon_s: Time,
    pub total_flood: f64,
    pub per_observation: f64,
    pub n_observations: usize,
    pub max_runtime_s: f64,
    pub runtime_fraction: f64,
    /// Percent difference of the total against the best row.
    pub delta_pct: f64,
    pub best: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario_hash: String,
    pub rows: Vec<ComparisonRow>,
    /// Best agile total over best nadir-fixed total, when both are present
    /// and the baseline observed anything.
    pub agility_ratio: Option<f64>,
}

pub fn compare_runs(runs: &[RunMetrics]) -> Result<Comparison, EvaluationError> {
    if runs.len() < 2 {
        return Err(EvaluationError::TooFewRuns(runs.len()));
    }
    let hash = &runs[0].scenario_hash;
    if let Some(r) = runs.iter().find(|r| &r.scenario_hash != hash) {
        return Err(EvaluationError::ScenarioMismatch(hash.clone(), r.scenario_hash.clone()));
    }
    let best = runs.iter().map(|r| r.total_flood).fold(f64::NEG_INFINITY, f64::max);
    let best_idx = runs.iter().position(|r| r.total_flood == best).unwrap_or(0);
    let rows = runs
        .iter()
        .enumerate()
        .map(|(i, r)| ComparisonRow {
            label: r.label.clone(),
            mode: r.mode,
            agile: r.agile,
            plan_horizon_s: r.plan_horizon_s,
            total_flood: r.total_flood,
            per_observation: r.per_observation,
            n_observations: r.n_observations,
            max_runtime_s: r.max_runtime_s,
            runtime_fraction: r.runtime_fraction,
            delta_pct: if best > 0.0 { 100.0 * (r.total_flood - best) / best } else { 0.0 },
            best: i == best_idx,
        })
        .collect();
    let best_of = |agile: bool| runs.iter().filter(|r| r.agile == agile).map(|r| r.total_flood).reduce(f64::max);
    let agility_ratio = match (best_of(true), best_of(false)) {
        (Some(a), Some(n)) if n > 0.0 => Some(a / n),
        _ => None,
    };
    Ok(Comparison { scenario_hash: hash.clone(), rows, agility_ratio })
}

pub fn write_comparison_csv<W: Write>(cmp: &Comparison, out: W) -> Result<(), EvaluationError> {
    let mut w = csv::Writer::from_writer(out);
    for r in &cmp.rows {
        w.serialize(r).map_err(|e| EvaluationError::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| EvaluationError::Csv(e.to_string()))
}
