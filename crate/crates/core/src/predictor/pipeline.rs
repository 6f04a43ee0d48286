use super::update::FloodEstimate;
use super::value::{path_value, PathValue, ValueField};
use super::{Knowledge, ObsSample, PredictorParams};
use crate::scenario::Scenario;
use crate::types::{Obs, Time};

/// Everything a satellite's predictor knows when it plans at `t_now`.
#[derive(Clone, Debug)]
pub struct PlanInputs<'a> {
    pub scenario: &'a Scenario,
    pub knowledge: &'a Knowledge,
    /// Own observations already committed (executed or retained) that the new
    /// plan must account for.
    pub own_committed: &'a [Obs],
    pub t_now: Time,
    pub horizon: (Time, Time),
    pub params: &'a PredictorParams,
}

/// Corrected flood estimate and value field used for one planning cycle.
/// Only samples taken and received by `t_now` enter the correction.
pub fn plan_value_field(inp: &PlanInputs<'_>) -> (ValueField, FloodEstimate) {
    let scn = inp.scenario;
    let est = FloodEstimate::from_samples(
        &scn.flood_init,
        &scn.est_precip,
        inp.knowledge.samples_known_at(inp.t_now),
        inp.params,
    );
    let mut field = ValueField::from_estimate(&scn.flood_init, &est, &scn.breakpoints, inp.params.suppression_window_s);
    field.decay_from = inp.horizon.0 - inp.params.decay_lookback_s;
    field.suppress_recent(inp.knowledge.observations_known_at(inp.t_now));
    for plan in inp.knowledge.peer_plans.values().filter(|p| p.known_since <= inp.t_now) {
        field.suppress_recent(plan.nodes.iter().copied());
    }
    field.suppress_recent(inp.own_committed.iter().copied());
    (field, est)
}

/// Scores candidate paths and returns the precipitation samples the update used.
pub fn value_update(inp: &PlanInputs<'_>, candidates: &[Vec<Obs>]) -> (Vec<PathValue>, Vec<ObsSample>) {
    let (field, _) = plan_value_field(inp);
    let scores = candidates.iter().map(|c| path_value(c, &field)).collect();
    let used = inp.knowledge.samples_known_at(inp.t_now).copied().collect();
    (scores, used)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::RegionSpec;
    use crate::scenario::{ScenarioParams, TruthParams};
    use crate::types::{GpId, SatId, WatershedId};

    fn scenario() -> Scenario {
        let r = RegionSpec { name: "a".into(), lat_deg: 0.0, lon_deg: 0.0, extent_km: 40.0, resolution_km: 10.0 };
        let params = ScenarioParams {
            horizon_s: 4 * 3600,
            watersheds_per_region: 2,
            truth: TruthParams { bumps_per_region: 4, spatial_sigma_km: [30.0, 40.0], ..Default::default() },
            ..Default::default()
        };
        Scenario::generate(&[r], &params, 4).unwrap()
    }

    #[test]
    fn degenerates_to_initial_value() {
        let scn = scenario();
        let k = Knowledge::new(scn.slot_s);
        let p = PredictorParams::default();
        let inp = PlanInputs { scenario: &scn, knowledge: &k, own_committed: &[], t_now: 0, horizon: (0, 3600), params: &p };
        let path = vec![Obs::new(GpId(0), 1000), Obs::new(GpId(5), 2000)];
        let (vals, used) = value_update(&inp, std::slice::from_ref(&path));
        let want = (scn.value_init.get(GpId(0), 1) as f64 + scn.value_init.get(GpId(5), 2) as f64) / 2.0;
        assert_eq!(vals[0].pathval, want);
        assert!(used.is_empty());
    }

    #[test]
    fn low_ratio_report_suppresses_watershed() {
        let scn = scenario();
        let p = PredictorParams::default();
        let w = WatershedId(0);
        let members = scn.geography.ws_members[w.index()].clone();
        let mut k = Knowledge::new(scn.slot_s);
        let t_obs = 600;
        // a peer observed the whole watershed and found 40% of the estimate
        for &gp in &members {
            let est = scn.est_precip.at_time(gp, t_obs);
            k.record(ObsSample { sat: SatId(1), gp, t: t_obs, precip: 0.4 * est }, t_obs + 30);
        }
        let inp = PlanInputs { scenario: &scn, knowledge: &k, own_committed: &[], t_now: 900, horizon: (900, 9000), params: &p };
        let (field, est) = plan_value_field(&inp);
        assert!(est.flagged().is_empty());
        for y in 1..scn.n_slots() {
            let q = scn.flood_init.get_ws(w, y);
            assert_eq!(field.ws_value(w, y), scn.breakpoints.value(0.05 * q) as f64);
            assert!(field.ws_value(w, y) <= scn.value_init.get_ws(w, y) as f64);
        }
        // before the report arrives nothing changes
        let early = PlanInputs { t_now: 620, horizon: (620, 9000), ..inp.clone() };
        let (f2, _) = plan_value_field(&early);
        assert_eq!(f2.ws_value(w, 3), scn.value_init.get_ws(w, 3) as f64);
    }

    #[test]
    fn own_revisit_within_window_scores_zero() {
        let scn = scenario();
        let k = Knowledge::new(scn.slot_s);
        let p = PredictorParams::default();
        let inp = PlanInputs { scenario: &scn, knowledge: &k, own_committed: &[], t_now: 0, horizon: (0, 3600), params: &p };
        let (field, _) = plan_value_field(&inp);
        let v = super::super::node_values(&[Obs::new(GpId(3), 1000), Obs::new(GpId(3), 1500)], &field);
        assert_eq!(v[1], 0.0);
    }
}
