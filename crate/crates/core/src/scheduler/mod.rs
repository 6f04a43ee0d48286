//! Dynamic-programming observation scheduler, overlapping-FOR coordination
//! and an exhaustive reference solver for small instances.

mod dp;
mod joint;
mod oracle;
mod synthetic;

pub use dp::{schedule, schedule_table, schedule_unpruned, DpTable};
pub use joint::{overlap_groups, overlapping_coordination, schedule_constellation, CoordinationOutcome};
pub use oracle::{exhaustive_oracle, OracleResult, ORACLE_MAX_GP, ORACLE_MAX_SATS, ORACLE_MAX_T};
pub use synthetic::{SyntheticProblem, SyntheticSat};

use std::cell::RefCell;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attitude::{eigen_angle_deg, SlewModel};
use crate::predictor::{node_values, PathValue, ValueField};
use crate::types::{GpId, Obs, SatId, SchedulePath, Time};

#[derive(Debug, Error, PartialEq)]
pub enum SchedulerError {
    #[error("instance too large for exhaustive search: {sats} sats, {gps} grid points, {steps} steps")]
    TooLarge { sats: usize, gps: usize, steps: usize },
    #[error("{count} joint candidates at t={t} exceed the cap of {cap}")]
    PermutationCap { t: Time, count: usize, cap: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulerParams {
    /// Paths retained per (gp, t) node.
    pub paths_per_node: usize,
    /// Stored paths older than the slew window examined per node, highest
    /// total first.
    pub settled_scan_limit: usize,
    /// Stop once this many candidates have been evaluated.
    pub max_evaluations: Option<u64>,
    /// Largest number of joint last-leg choices per step before overlapping
    /// satellites fall back to sequential scheduling.
    pub permutation_cap: usize,
    pub coordinate_overlaps: bool,
}

impl Default for SchedulerParams {
    fn default() -> Self {
        SchedulerParams { paths_per_node: 1, settled_scan_limit: 64, max_evaluations: None, permutation_cap: 10_000, coordinate_overlaps: true }
    }
}

/// Geometry and timing a scheduler needs; implemented for real orbits and
/// for synthetic test instances.
pub trait PlanningProblem {
    /// Planning window `[start, end)`.
    fn horizon(&self) -> (Time, Time);
    fn step(&self) -> Time {
        1
    }
    /// Grid points inside the field of regard of `sat` at `t`, ascending.
    fn in_for(&self, sat: SatId, t: Time, out: &mut Vec<GpId>);
    /// Unit vector from `sat` to `gp` at `t` in an inertial frame.
    fn pointing(&self, sat: SatId, gp: GpId, t: Time) -> Vector3<f64>;
    fn slew_model(&self) -> &SlewModel;
    fn for_half_angle_deg(&self) -> f64;

    fn in_for_contains(&self, sat: SatId, gp: GpId, t: Time) -> bool {
        let mut v = Vec::new();
        self.in_for(sat, t, &mut v);
        v.binary_search(&gp).is_ok()
    }

    fn slew_time(&self, sat: SatId, from: Obs, to: Obs) -> f64 {
        let a = self.pointing(sat, from.gp, from.t);
        let b = self.pointing(sat, to.gp, to.t);
        self.slew_model().time_for_angle(eigen_angle_deg(&a, &b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub path: SchedulePath,
    pub value: PathValue,
    /// Candidate evaluations performed; drives the modeled planner runtime.
    pub evaluations: u64,
    /// Scheduled without joint coordination after the permutation cap tripped.
    pub fallback: bool,
    /// Stopped early on the evaluation budget; the path covers only part of the horizon.
    pub truncated: bool,
}

impl PlanResult {
    pub fn empty(sat: SatId) -> Self {
        PlanResult { path: SchedulePath::new(sat), value: PathValue::default(), evaluations: 0, fallback: false, truncated: false }
    }
}

/// Checks a path against the problem independently of how it was built.
pub fn check_path<P: PlanningProblem + ?Sized>(problem: &P, path: &SchedulePath, anchor: Option<Obs>) -> Result<(), String> {
    let (h0, h1) = problem.horizon();
    let mut prev = anchor;
    for &o in &path.nodes {
        if o.t < h0 || o.t >= h1 {
            return Err(format!("{:?} outside horizon", o));
        }
        if !problem.in_for_contains(path.sat, o.gp, o.t) {
            return Err(format!("{:?} outside field of regard", o));
        }
        if let Some(p) = prev {
            if o.t <= p.t {
                return Err(format!("{:?} not after {:?}", o, p));
            }
            let need = problem.slew_time(path.sat, p, o);
            if need > (o.t - p.t) as f64 + 1e-9 {
                return Err(format!("slew {:?}->{:?} needs {need:.3} s", p, o));
            }
        }
        prev = Some(o);
    }
    Ok(())
}

/// Value of several paths together: nodes merged chronologically (ties by
/// satellite order) and scored once.
pub fn union_value(paths: &[SchedulePath], field: &ValueField) -> PathValue {
    let mut merged: Vec<(Time, usize, Obs)> =
        paths.iter().enumerate().flat_map(|(i, p)| p.nodes.iter().map(move |&o| (o.t, i, o))).collect();
    merged.sort_by_key(|&(t, i, o)| (t, i, o.gp));
    let nodes: Vec<Obs> = merged.into_iter().map(|(_, _, o)| o).collect();
    PathValue::from_total(node_values(&nodes, field).iter().sum(), nodes.len())
}

/// Each path's share of the union value, crediting a node's marginal to the
/// satellite that takes it.
pub fn attributed_values(paths: &[SchedulePath], field: &ValueField) -> Vec<f64> {
    let mut merged: Vec<(Time, usize, Obs)> =
        paths.iter().enumerate().flat_map(|(i, p)| p.nodes.iter().map(move |&o| (o.t, i, o))).collect();
    merged.sort_by_key(|&(t, i, o)| (t, i, o.gp));
    let nodes: Vec<Obs> = merged.iter().map(|&(_, _, o)| o).collect();
    let mut out = vec![0.0; paths.len()];
    for ((_, i, _), v) in merged.iter().zip(node_values(&nodes, field)) {
        out[*i] += v;
    }
    out
}

/// Pointing-cone reachability, memoized per time gap.
pub(crate) struct Reach<'a> {
    model: &'a SlewModel,
    cos_limit: RefCell<Vec<Option<f64>>>,
}

impl<'a> Reach<'a> {
    pub fn new(model: &'a SlewModel) -> Self {
        Reach { model, cos_limit: RefCell::new(Vec::new()) }
    }

    fn limit(&self, dt: Time) -> Option<f64> {
        let i = dt as usize;
        let mut c = self.cos_limit.borrow_mut();
        if i >= c.len() {
            let start = c.len();
            c.extend((start..=i).map(|d| {
                self.model.max_angle_within(d as f64).map(|a| if a >= 180.0 { -2.0 } else { a.to_radians().cos() })
            }));
        }
        c[i]
    }

    /// Whether re-pointing from `a` to `b` fits in `dt` seconds.
    pub fn feasible(&self, a: &Vector3<f64>, b: &Vector3<f64>, dt: Time) -> bool {
        if dt <= 0 {
            return false;
        }
        let Some(lim) = self.limit(dt) else { return false };
        let d = a.dot(b);
        if d >= lim + 1e-9 {
            true
        } else if d <= lim - 1e-9 {
            false
        } else {
            self.model.time_for_angle(eigen_angle_deg(a, b)) <= dt as f64 + 1e-9
        }
    }
}
