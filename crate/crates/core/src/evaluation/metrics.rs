use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::executive::{Mode, RunOutput};
use crate::network::LatencySummary;
use crate::scenario::{slot_of, FloodField};
use crate::types::{GpId, Time};

/// Flood categories on normalized streamflow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CategoryThresholds {
    pub action: f64,
    pub minor: f64,
    pub moderate: f64,
}

impl Default for CategoryThresholds {
    fn default() -> Self {
        CategoryThresholds { action: 1.0, minor: 1.5, moderate: 2.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    pub thresholds: CategoryThresholds,
}

/// Distinct observed (gp, slot) pairs at or above each category threshold.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub action: usize,
    pub minor: usize,
    pub moderate: usize,
}

fn unique_slots(flood: &FloodField, observations: impl IntoIterator<Item = (GpId, Time)>) -> BTreeSet<(GpId, usize)> {
    observations.into_iter().map(|(gp, t)| (gp, slot_of(t, flood.slot_s))).collect()
}

/// True flood magnitude summed over distinct observed (gp, slot) pairs; a
/// second satellite seeing the same cell in the same slot adds nothing.
pub fn total_flood_magnitude(flood: &FloodField, observations: impl IntoIterator<Item = (GpId, Time)>) -> f64 {
    unique_slots(flood, observations).into_iter().map(|(gp, y)| flood.get(gp, y)).sum()
}

pub fn category_counts(
    flood: &FloodField,
    observations: impl IntoIterator<Item = (GpId, Time)>,
    th: &CategoryThresholds,
) -> CategoryCounts {
    let mut c = CategoryCounts::default();
    for (gp, y) in unique_slots(flood, observations) {
        let q = flood.get(gp, y);
        c.action += usize::from(q >= th.action);
        c.minor += usize::from(q >= th.minor);
        c.moderate += usize::from(q >= th.moderate);
    }
    c
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub label: String,
    pub mode: Mode,
    /// False for the nadir-fixed baseline.
    pub agile: bool,
    pub scenario_hash: String,
    pub total_flood: f64,
    /// Total over every executed observation, duplicates included.
    pub per_observation: f64,
    pub n_observations: usize,
    pub n_unique: usize,
    pub categories: CategoryCounts,
    pub n_plans: usize,
    pub skipped_plans: usize,
    pub max_runtime_s: f64,
    pub mean_runtime_s: f64,
    /// Longest modeled planner runtime over the planning horizon it served.
    pub runtime_fraction: f64,
    pub plan_horizon_s: Time,
    /// Duplicate observations are scored once per (gp, 900 s slot).
    pub dedup_rule: String,
    pub latency: Option<LatencySummary>,
}

/// Metrics from truth and logs only; planner estimates never enter the score.
pub fn run_metrics(
    label: &str,
    scenario_hash: &str,
    flood: &FloodField,
    out: &RunOutput,
    plan_horizon_s: Time,
    latency: Option<LatencySummary>,
    opts: &EvalOptions,
) -> RunMetrics {
    let obs = || out.observations.iter().map(|o| (o.gp, o.t));
    let total = total_flood_magnitude(flood, obs());
    let n = out.observations.len();
    let runtimes: Vec<f64> = out.plans.iter().map(|p| p.modeled_runtime_s).collect();
    let max_rt = runtimes.iter().copied().fold(0.0, f64::max);
    RunMetrics {
        label: label.to_string(),
        mode: out.mode,
        agile: true,
        scenario_hash: scenario_hash.to_string(),
        total_flood: total,
        per_observation: if n > 0 { total / n as f64 } else { 0.0 },
        n_observations: n,
        n_unique: unique_slots(flood, obs()).len(),
        categories: category_counts(flood, obs(), &opts.thresholds),
        n_plans: out.plans.len(),
        skipped_plans: out.plans.iter().filter(|p| p.skipped).count(),
        max_runtime_s: max_rt,
        mean_runtime_s: if runtimes.is_empty() { 0.0 } else { runtimes.iter().sum::<f64>() / runtimes.len() as f64 },
        runtime_fraction: if plan_horizon_s > 0 { max_rt / plan_horizon_s as f64 } else { 0.0 },
        plan_horizon_s,
        dedup_rule: "gp_slot_900s".to_string(),
        latency,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::WatershedField;
    use proptest::prelude::*;

    fn field() -> FloodField {
        // 3 gps in 2 watersheds, 4 slots
        let mut f = WatershedField::filled(vec![0, 0, 1], 2, 4, 900);
        for y in 0..4 {
            *f.get_ws_mut(crate::types::WatershedId(0), y) = 1.3 + y as f64;
            *f.get_ws_mut(crate::types::WatershedId(1), y) = 0.5 * y as f64;
        }
        f
    }

    #[test]
    fn totals() {
        let f = field();
        assert_eq!(total_flood_magnitude(&f, []), 0.0);
        assert!((total_flood_magnitude(&f, [(GpId(0), 10)]) - 1.3).abs() < 1e-12);
        // same gp, same slot, seen twice
        let two = total_flood_magnitude(&f, [(GpId(2), 1900), (GpId(2), 2600)]);
        assert_eq!(two, 1.0);
        // same watershed, different gps count separately
        assert!((total_flood_magnitude(&f, [(GpId(0), 10), (GpId(1), 10)]) - 2.6).abs() < 1e-12);
    }

    #[test]
    fn categories() {
        let f = field();
        let c = category_counts(&f, [(GpId(0), 0), (GpId(2), 2000), (GpId(2), 2800), (GpId(1), 3000)], &CategoryThresholds::default());
        // values 1.3, 1.0, 1.5 (slot 3 of ws1), 4.3
        assert_eq!(c, CategoryCounts { action: 4, minor: 2, moderate: 1 });
    }

    proptest! {
        #[test]
        fn monotone_and_relabel_invariant(obs in prop::collection::vec((0u32..3, 0i64..3600), 0..12), extra in (0u32..3, 0i64..3600)) {
            let f = field();
            let base: Vec<(GpId, Time)> = obs.iter().map(|&(g, t)| (GpId(g), t)).collect();
            let t0 = total_flood_magnitude(&f, base.iter().copied());
            let mut more = base.clone();
            more.push((GpId(extra.0), extra.1));
            prop_assert!(total_flood_magnitude(&f, more.iter().copied()) >= t0);
            let mut rev = base.clone();
            rev.reverse();
            prop_assert_eq!(total_flood_magnitude(&f, rev.iter().copied()), t0);
        }
    }
}
