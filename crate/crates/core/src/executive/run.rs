use std::collections::{BTreeMap, VecDeque};

use super::{AuditTrail, ExecutiveConfig, ExecutiveError, Mission, Mode, ObservationRecord, PlanRecord, RunOutput, UsedSample};
use crate::network::{assign_priority, chunk_payload, ttl_for, Bundle, BundlePayload, NetworkState};
use crate::orbits::orbital_period;
use crate::predictor::{plan_value_field, Knowledge, ObsSample, PeerPlan, PlanInputs};
use crate::scenario::{sample_precip, slot_of};
use crate::scheduler::{schedule, schedule_constellation, PlanResult};
use crate::types::{Obs, RegionId, SatId, Time, WatershedId};

pub fn run(mission: &Mission<'_>, cfg: &ExecutiveConfig) -> Result<RunOutput, ExecutiveError> {
    match cfg.mode {
        Mode::Onboard => run_onboard(mission, cfg),
        Mode::Ground => run_ground(mission, cfg),
    }
}

#[derive(Default)]
struct SatState {
    plan: VecDeque<Obs>,
    executed: Vec<Obs>,
    unsent: Vec<ObsSample>,
    last_plan: Option<Time>,
}

struct Runner<'m, 'a> {
    mission: &'m Mission<'a>,
    cfg: &'m ExecutiveConfig,
    sats: Vec<SatId>,
    end: Time,
    states: Vec<SatState>,
    observations: Vec<ObservationRecord>,
    plans: Vec<PlanRecord>,
    trail: AuditTrail,
}

impl<'m, 'a> Runner<'m, 'a> {
    fn new(mission: &'m Mission<'a>, cfg: &'m ExecutiveConfig) -> Result<Self, ExecutiveError> {
        cfg.validate()?;
        let sats = mission.sats();
        Ok(Runner {
            mission,
            cfg,
            end: mission.scenario.horizon_s,
            states: sats.iter().map(|_| SatState::default()).collect(),
            sats,
            observations: Vec::new(),
            plans: Vec::new(),
            trail: AuditTrail::default(),
        })
    }

    /// Schedules `sat` over `window` and splices the result onto the nodes
    /// it keeps from before the window. Pre-mission plans (`t_plan == 0`)
    /// are not subject to the runtime budget.
    fn plan_one(&mut self, sat: SatId, t_plan: Time, window: (Time, Time), knowledge: &Knowledge, extra_committed: &[Obs]) {
        if window.0 >= window.1 {
            return;
        }
        let st = &self.states[sat.index()];
        let retained: Vec<Obs> = st.plan.iter().copied().filter(|o| o.t < window.0).collect();
        let mut committed: Vec<Obs> = st.executed.clone();
        committed.extend(&retained);
        committed.extend(extra_committed);
        let params = &self.mission.spec.predictor;
        let inp = PlanInputs {
            scenario: self.mission.scenario,
            knowledge,
            own_committed: &committed,
            t_now: t_plan,
            horizon: window,
            params,
        };
        let (field, _) = plan_value_field(&inp);
        let anchor = retained.last().or(st.executed.last()).copied();
        let problem = self.mission.geometry.problem(window, self.cfg.plan_step_s);
        let mut params = self.mission.spec.scheduler.clone();
        if t_plan > 0 {
            // a plan that would overrun the lead is discarded, so stop computing it there
            params.max_evaluations = Some(self.cfg.evaluation_budget());
        }
        let result = schedule(&problem, sat, anchor, &field, &params);
        self.log_used(sat, t_plan, knowledge);
        self.commit(sat, t_plan, window, retained, result, t_plan > 0);
    }

    fn commit(&mut self, sat: SatId, t_plan: Time, window: (Time, Time), retained: Vec<Obs>, result: PlanResult, budgeted: bool) {
        let runtime = self.cfg.modeled_runtime_s(result.evaluations);
        let skipped = budgeted && (result.truncated || runtime > self.cfg.plan_lead_s as f64);
        if skipped {
            log::warn!(
                "{sat} plan at t={t_plan}: not finished within the {} s lead ({} evaluations); keeping the previous plan",
                self.cfg.plan_lead_s,
                result.evaluations
            );
        } else {
            let st = &mut self.states[sat.index()];
            st.plan = retained.into_iter().chain(result.path.nodes.iter().copied()).collect();
            self.trail.segments.push((sat, t_plan, result.path.nodes.clone()));
        }
        self.plans.push(PlanRecord {
            sat,
            t_plan,
            window_start: window.0,
            window_end: window.1,
            nodes: if skipped { 0 } else { result.path.len() },
            value_total: if skipped { 0.0 } else { result.value.total },
            evaluations: result.evaluations,
            modeled_runtime_s: runtime,
            skipped,
            fallback: result.fallback,
        });
    }

    /// Logs the samples a plan at `t_plan` could use that no earlier plan of `planner` saw.
    fn log_used(&mut self, planner: SatId, t_plan: Time, knowledge: &Knowledge) {
        let prev = self.states[planner.index()].last_plan;
        for (s, known) in knowledge.samples() {
            let new = prev.is_none_or(|p| known > p);
            if new && s.t <= t_plan && known <= t_plan {
                self.trail.used.push(UsedSample { planner, t_plan, src: s.sat, obs: s.obs(), known_since: known });
            }
        }
        self.states[planner.index()].last_plan = Some(t_plan);
    }

    /// Executes the node planned for `t`, if any, and returns its sample.
    fn execute(&mut self, sat: SatId, t: Time) -> Option<ObsSample> {
        let st = &mut self.states[sat.index()];
        while st.plan.front().is_some_and(|o| o.t < t) {
            let o = st.plan.pop_front().unwrap();
            self.trail.unobservable.push((sat, o));
        }
        if st.plan.front().is_none_or(|o| o.t != t) {
            return None;
        }
        let o = st.plan.pop_front().unwrap();
        if !self.mission.geometry.visible(sat, o.gp, t) {
            log::warn!("{sat} planned {} at t={t} outside its field of regard; skipped", o.gp);
            self.trail.unobservable.push((sat, o));
            return None;
        }
        let scn = self.mission.scenario;
        let precip = sample_precip(&scn.truth_precip, o.gp, t);
        self.observations.push(ObservationRecord {
            sat,
            gp: o.gp,
            t,
            slot: slot_of(t, scn.slot_s),
            region: scn.geography.region(o.gp),
            watershed: scn.geography.watershed(o.gp),
            precip,
            flood: scn.true_flood.at_time(o.gp, t),
        });
        st.executed.push(o);
        let sample = ObsSample { sat, gp: o.gp, t, precip };
        st.unsent.push(sample);
        Some(sample)
    }

    fn finish(mut self, deliveries: Vec<crate::network::DeliveryRecord>) -> RunOutput {
        self.observations.sort_by_key(|o| (o.t, o.sat));
        RunOutput {
            mode: self.cfg.mode,
            n_sats: self.sats.len(),
            horizon: (0, self.end),
            observations: self.observations,
            plans: self.plans,
            deliveries,
            trail: self.trail,
        }
    }

    /// Per-watershed observed/estimated precipitation over samples known at `t`.
    fn ratio_summary(&self, knowledge: &Knowledge, region: RegionId, t: Time) -> Vec<(WatershedId, f64)> {
        let scn = self.mission.scenario;
        let mut sums: BTreeMap<WatershedId, (f64, f64)> = BTreeMap::new();
        for s in knowledge.samples_known_at(t) {
            if scn.geography.region(s.gp) != region {
                continue;
            }
            let e = sums.entry(scn.geography.watershed(s.gp)).or_default();
            e.0 += s.precip;
            e.1 += scn.est_precip.at_time(s.gp, s.t);
        }
        sums.into_iter().filter(|(_, (_, est))| *est > 0.0).map(|(w, (o, e))| (w, o / e)).collect()
    }

    fn flush(&mut self, net: &mut NetworkState, sat: SatId, t: Time, knowledge: &Knowledge) {
        let unsent = std::mem::take(&mut self.states[sat.index()].unsent);
        if unsent.is_empty() {
            return;
        }
        let scn = self.mission.scenario;
        let mut by_region: BTreeMap<RegionId, Vec<ObsSample>> = BTreeMap::new();
        for s in unsent {
            by_region.entry(scn.geography.region(s.gp)).or_default().push(s);
        }
        let np = &self.mission.spec.network;
        let budget = (np.bundle_size_bits / 8) as usize;
        for (region, samples) in by_region {
            let payload = BundlePayload { region, samples, ratios: self.ratio_summary(knowledge, region, t) };
            let chunks = chunk_payload(payload, &np.layout, budget);
            for &dst in &self.sats {
                if dst == sat {
                    continue;
                }
                let priority = assign_priority(&self.mission.passes, &self.sats, sat, dst, region, t);
                let max_ttl = np.ttl_max_s.unwrap_or_else(|| orbital_period(&self.mission.constellation[dst.index()]).round() as Time);
                let ttl = np.ttl_override_s.unwrap_or_else(|| ttl_for(&self.mission.passes, dst, region, t, np.ttl_min_s, max_ttl));
                for chunk in &chunks {
                    let obs = chunk.samples.iter().map(|s| s.obs()).collect();
                    let id = net.submit(Bundle {
                        id: 0,
                        src: sat,
                        dst,
                        created_at: t,
                        ttl,
                        size_bits: 0,
                        priority,
                        payload: chunk.clone(),
                    });
                    self.trail.bundle_contents.insert(id, obs);
                }
            }
        }
    }
}

/// Decentralized operation: every satellite plans on its own knowledge at
/// each replan epoch and shares what it observed over the DTN.
pub fn run_onboard(mission: &Mission<'_>, cfg: &ExecutiveConfig) -> Result<RunOutput, ExecutiveError> {
    let mut r = Runner::new(mission, cfg)?;
    let mut net = NetworkState::new(&mission.contacts, mission.spec.network.clone());
    let mut know: Vec<Knowledge> = r.sats.iter().map(|_| Knowledge::new(mission.scenario.slot_s)).collect();
    let sats = r.sats.clone();
    for t in 0..r.end {
        if t % cfg.replan_interval_s == 0 {
            for &sat in &sats {
                for (b, at) in net.drain_inbox(sat) {
                    for s in &b.payload.samples {
                        know[sat.index()].record(*s, at);
                    }
                }
                let start = if t == 0 { 0 } else { t + cfg.plan_lead_s };
                let window = (start, (t + cfg.plan_lead_s + cfg.plan_horizon_s).min(r.end));
                r.plan_one(sat, t, window, &know[sat.index()], &[]);
            }
        }
        for &sat in &sats {
            if let Some(s) = r.execute(sat, t) {
                know[sat.index()].record(s, t);
            }
        }
        if t % cfg.bundle_interval_s == 0 {
            for &sat in &sats {
                r.flush(&mut net, sat, t, &know[sat.index()]);
            }
        }
        if t % cfg.network_step_s == 0 {
            net.step(t, cfg.network_step_s)?;
        }
    }
    net.settle(r.end);
    let deliveries = net.records();
    Ok(r.finish(deliveries))
}

/// Station contact times of each satellite, staggered evenly over one cadence.
pub fn ground_contact_times(n_sats: usize, cadence: Time, end: Time) -> Vec<Vec<Time>> {
    (0..n_sats)
        .map(|k| {
            let phase = k as Time * cadence / n_sats.max(1) as Time;
            (0..).map(|m| phase + m * cadence).take_while(|&t| t < end).filter(|&t| t > 0).collect()
        })
        .collect()
}

/// Centralized operation: the ground plans every satellite, learns their
/// observations only at station contacts and uplinks new plans then.
pub fn run_ground(mission: &Mission<'_>, cfg: &ExecutiveConfig) -> Result<RunOutput, ExecutiveError> {
    let mut r = Runner::new(mission, cfg)?;
    let cadence = cfg.gs_contact_cadence_s.expect("validated");
    let contacts = ground_contact_times(r.sats.len(), cadence, r.end);
    let sats = r.sats.clone();
    let mut ground = Knowledge::new(mission.scenario.slot_s);
    let lead = cfg.plan_lead_s;

    let ends: Vec<Time> =
        contacts.iter().map(|c| c.first().map_or(r.end, |&t| (t + lead).min(r.end))).collect();
    let w_end = ends.iter().copied().max().unwrap_or(r.end);
    let inp = PlanInputs {
        scenario: mission.scenario,
        knowledge: &ground,
        own_committed: &[],
        t_now: 0,
        horizon: (0, w_end),
        params: &mission.spec.predictor,
    };
    let (field, _) = plan_value_field(&inp);
    let problem = mission.geometry.problem((0, w_end), cfg.plan_step_s);
    let outcome = schedule_constellation(&problem, &sats, &vec![None; sats.len()], &field, &mission.spec.scheduler);
    for (k, mut res) in outcome.plans.into_iter().enumerate() {
        let sat = sats[k];
        res.path.nodes.retain(|o| o.t < ends[k]);
        ground.record_plan(sat, 0, res.path.nodes.clone(), 0);
        r.states[k].last_plan = Some(0);
        r.commit(sat, 0, (0, ends[k]), Vec::new(), res, false);
    }

    let mut next = vec![0usize; sats.len()];
    for t in 0..r.end {
        for (k, &sat) in sats.iter().enumerate() {
            if contacts[k].get(next[k]) != Some(&t) {
                continue;
            }
            next[k] += 1;
            for s in std::mem::take(&mut r.states[k].unsent) {
                ground.record(s, t);
            }
            r.trail.downlinks.push((sat, t));
            let until = contacts[k].get(next[k]).map_or(r.end, |&c| c + lead);
            let window = (t + lead, until.min(r.end));
            let retained: Vec<Obs> = r.states[k].plan.iter().copied().filter(|o| o.t < window.0).collect();
            ground.peer_plans.insert(sat, PeerPlan { issued: t, nodes: retained, known_since: t });
            r.plan_one(sat, t, window, &ground, &[]);
            let full: Vec<Obs> = r.states[k].plan.iter().copied().collect();
            ground.peer_plans.insert(sat, PeerPlan { issued: t, nodes: full, known_since: t });
        }
        for &sat in &sats {
            r.execute(sat, t);
        }
    }
    Ok(r.finish(Vec::new()))
}
