use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::update::FloodEstimate;
use crate::scenario::{slot_of, Breakpoints, FloodField, ValueFieldInit};
use crate::types::{GpId, Obs, Time, WatershedId};

/// Value divided by one plus the number of prior observations.
pub fn decay_value(value_est: f64, n_obs: usize) -> f64 {
    value_est / (1 + n_obs) as f64
}

/// Occurrences of one grid point earlier in a candidate path.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct PathCounts {
    pub count: u32,
    pub last: Option<Time>,
}

/// Estimated value per (gp, slot) together with the suppression ledger of
/// observations that discount it.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueField {
    ws_of_gp: Vec<u32>,
    n_slots: usize,
    slot_s: Time,
    /// value_est per watershed and slot.
    ws_values: Vec<f64>,
    ledger: BTreeMap<GpId, BTreeSet<Time>>,
    /// Observations before this time do not decay value.
    pub decay_from: Time,
    pub suppress_s: Time,
}

impl ValueField {
    pub fn from_init(init: &ValueFieldInit, suppress_s: Time) -> Self {
        ValueField {
            ws_of_gp: init.ws_of_gp.clone(),
            n_slots: init.n_slots,
            slot_s: init.slot_s,
            ws_values: init.values.iter().map(|&v| v as f64).collect(),
            ledger: BTreeMap::new(),
            decay_from: Time::MIN,
            suppress_s,
        }
    }

    /// value_est from the corrected flood magnitude through the breakpoint map.
    pub fn from_estimate(init: &FloodField, est: &FloodEstimate, breakpoints: &Breakpoints, suppress_s: Time) -> Self {
        let mut ws_values = Vec::with_capacity(init.values.len());
        for w in 0..init.n_ws {
            for y in 0..init.n_slots {
                ws_values.push(breakpoints.value(est.magnitude(init, WatershedId(w as u32), y)) as f64);
            }
        }
        ValueField {
            ws_of_gp: init.ws_of_gp.clone(),
            n_slots: init.n_slots,
            slot_s: init.slot_s,
            ws_values,
            ledger: BTreeMap::new(),
            decay_from: Time::MIN,
            suppress_s,
        }
    }

    pub fn value_est(&self, gp: GpId, t: Time) -> f64 {
        let slot = slot_of(t, self.slot_s).min(self.n_slots - 1);
        self.ws_values[self.ws_of_gp[gp.index()] as usize * self.n_slots + slot]
    }

    pub fn ws_value(&self, ws: WatershedId, slot: usize) -> f64 {
        self.ws_values[ws.index() * self.n_slots + slot]
    }

    /// Adds observations to the suppression ledger. Idempotent.
    pub fn suppress_recent(&mut self, observations: impl IntoIterator<Item = Obs>) {
        for o in observations {
            self.ledger.entry(o.gp).or_default().insert(o.t);
        }
    }

    pub fn ledger_len(&self) -> usize {
        self.ledger.values().map(BTreeSet::len).sum()
    }

    pub fn ledger(&self) -> impl Iterator<Item = Obs> + '_ {
        self.ledger.iter().flat_map(|(&gp, ts)| ts.iter().map(move |&t| Obs::new(gp, t)))
    }

    fn ledger_times(&self, gp: GpId) -> Option<&BTreeSet<Time>> {
        self.ledger.get(&gp)
    }

    /// Ledger observations of `gp` in `[decay_from, t)`.
    pub fn prior_count(&self, gp: GpId, t: Time) -> usize {
        if self.decay_from >= t {
            return 0;
        }
        self.ledger_times(gp).map_or(0, |ts| ts.range(self.decay_from..t).count())
    }

    /// Some ledger observation of `gp` lies in `[t - suppress_s, t]`.
    pub fn suppressed(&self, gp: GpId, t: Time) -> bool {
        self.ledger_times(gp).is_some_and(|ts| ts.range(t - self.suppress_s..=t).next().is_some())
    }

    /// value_new at (gp, t) given only the ledger.
    pub fn value_new(&self, gp: GpId, t: Time) -> f64 {
        self.marginal(gp, t, PathCounts::default())
    }

    /// Value of appending (gp, t) to a path whose earlier nodes visit `gp`
    /// as described by `in_path`.
    pub fn marginal(&self, gp: GpId, t: Time, in_path: PathCounts) -> f64 {
        if in_path.last.is_some_and(|l| l >= t - self.suppress_s) || self.suppressed(gp, t) {
            return 0.0;
        }
        decay_value(self.value_est(gp, t), self.prior_count(gp, t) + in_path.count as usize)
    }

    pub fn slot_s(&self) -> Time {
        self.slot_s
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PathValue {
    /// Sum of marginal values divided by max(1, path length).
    pub pathval: f64,
    /// Sum of marginal values.
    pub total: f64,
    pub len: usize,
}

impl PathValue {
    pub fn from_total(total: f64, len: usize) -> Self {
        PathValue { pathval: total / len.max(1) as f64, total, len }
    }
}

/// Marginal values of each node in order, each node discounted by the
/// ledger and by earlier nodes of the same path.
pub fn node_values(path: &[Obs], field: &ValueField) -> Vec<f64> {
    let mut seen: BTreeMap<GpId, PathCounts> = BTreeMap::new();
    path.iter()
        .map(|o| {
            let c = seen.entry(o.gp).or_default();
            let v = field.marginal(o.gp, o.t, *c);
            c.count += 1;
            c.last = Some(o.t);
            v
        })
        .collect()
}

pub fn path_value(path: &[Obs], field: &ValueField) -> PathValue {
    PathValue::from_total(node_values(path, field).iter().sum(), path.len())
}
