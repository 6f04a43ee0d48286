use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::scenario::slot_of;
use crate::types::{GpId, Obs, SatId, Time};

/// Truth precipitation sampled by `sat` when it observed `gp` at `t`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObsSample {
    pub sat: SatId,
    pub gp: GpId,
    pub t: Time,
    pub precip: f64,
}

impl ObsSample {
    pub fn obs(&self) -> Obs {
        Obs::new(self.gp, self.t)
    }
}

/// A peer's most recently announced plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeerPlan {
    pub issued: Time,
    pub nodes: Vec<Obs>,
    pub known_since: Time,
}

/// One satellite's model parameters: every sample it has observed or received,
/// when it learned of each, and the peer plans it knows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Knowledge {
    slot_s: Time,
    /// Keyed by (gp, slot) so repeated sightings of one sample do not bias ratios.
    samples: BTreeMap<(GpId, usize), (ObsSample, Time)>,
    /// Every observation event known, including repeats within a slot.
    observations: BTreeMap<Obs, Time>,
    /// Latest sample time per source satellite.
    pub t_src: BTreeMap<SatId, Time>,
    pub peer_plans: BTreeMap<SatId, PeerPlan>,
}

impl Knowledge {
    pub fn new(slot_s: Time) -> Self {
        Knowledge { slot_s, ..Default::default() }
    }

    /// Records a sample learned at `known_since`; returns whether anything new was learned.
    pub fn record(&mut self, sample: ObsSample, known_since: Time) -> bool {
        let fresh_obs = match self.observations.get(&sample.obs()) {
            Some(&k) if k <= known_since => false,
            _ => {
                self.observations.insert(sample.obs(), known_since);
                true
            }
        };
        let key = (sample.gp, slot_of(sample.t, self.slot_s));
        let fresh_sample = match self.samples.get(&key) {
            Some(&(_, k)) if k <= known_since => false,
            _ => {
                self.samples.insert(key, (sample, known_since));
                true
            }
        };
        let src = self.t_src.entry(sample.sat).or_insert(sample.t);
        *src = (*src).max(sample.t);
        fresh_obs || fresh_sample
    }

    /// Keeps the newest announcement per peer.
    pub fn record_plan(&mut self, sat: SatId, issued: Time, nodes: Vec<Obs>, known_since: Time) -> bool {
        match self.peer_plans.get(&sat) {
            Some(p) if p.issued >= issued => false,
            _ => {
                self.peer_plans.insert(sat, PeerPlan { issued, nodes, known_since });
                true
            }
        }
    }

    /// Samples taken at or before `t` and known at or before `t`.
    pub fn samples_known_at(&self, t: Time) -> impl Iterator<Item = &ObsSample> {
        self.samples.values().filter(move |(s, k)| s.t <= t && *k <= t).map(|(s, _)| s)
    }

    pub fn observations_known_at(&self, t: Time) -> impl Iterator<Item = Obs> + '_ {
        self.observations.iter().filter(move |(o, k)| o.t <= t && **k <= t).map(|(o, _)| *o)
    }

    pub fn samples(&self) -> impl Iterator<Item = (&ObsSample, Time)> {
        self.samples.values().map(|(s, k)| (s, *k))
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn slot_s(&self) -> Time {
        self.slot_s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(sat: u32, gp: u32, t: Time) -> ObsSample {
        ObsSample { sat: SatId(sat), gp: GpId(gp), t, precip: 1.0 }
    }

    #[test]
    fn dedups_by_slot_and_tracks_sources() {
        let mut k = Knowledge::new(900);
        assert!(k.record(s(0, 1, 10), 10));
        assert!(!k.record(s(0, 1, 10), 50));
        // second sighting within the slot: new event, same sample
        assert!(k.record(s(1, 1, 20), 20));
        assert_eq!(k.n_samples(), 1);
        assert_eq!(k.observations_known_at(100).count(), 2);
        assert_eq!(k.t_src[&SatId(1)], 20);
    }

    #[test]
    fn knowledge_respects_time() {
        let mut k = Knowledge::new(900);
        k.record(s(1, 2, 100), 500);
        assert_eq!(k.samples_known_at(400).count(), 0);
        assert_eq!(k.samples_known_at(500).count(), 1);
        // learning the same thing earlier moves the knowledge time back
        assert!(k.record(s(1, 2, 100), 300));
        assert_eq!(k.samples_known_at(400).count(), 1);
    }

    #[test]
    fn newest_plan_wins() {
        let mut k = Knowledge::new(900);
        assert!(k.record_plan(SatId(2), 100, vec![Obs::new(GpId(1), 200)], 120));
        assert!(!k.record_plan(SatId(2), 50, vec![], 130));
        assert!(k.record_plan(SatId(2), 300, vec![], 310));
        assert!(k.peer_plans[&SatId(2)].nodes.is_empty());
    }
}
