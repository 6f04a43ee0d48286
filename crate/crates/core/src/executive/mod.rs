//! Per-satellite plan/execute/communicate loop in onboard and ground modes,
//! the mission geometry it runs on, and post-run audits.

mod audit;
mod geometry;
mod run;

pub use audit::{audit_access, audit_additivity, audit_causality, AuditReport};
pub use geometry::{Geometry, GeometryProblem};
pub use run::{ground_contact_times, run, run_ground, run_onboard};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attitude::SlewModel;
use crate::network::{BundleId, DeliveryRecord, NetworkError, NetworkParams};
use crate::orbits::{
    compute_contacts, gaps_from_passes, region_passes, AccessGap, ContactParams, ContactPlan, GroundStation,
    OrbitError, OrbitalElements, RegionPass,
};
use crate::predictor::PredictorParams;
use crate::scenario::Scenario;
use crate::scheduler::SchedulerParams;
use crate::types::{GpId, Obs, RegionId, SatId, Time, WatershedId};

#[derive(Debug, Error)]
pub enum ExecutiveError {
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("invalid executive config: {0}")]
    Config(String),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Onboard,
    Ground,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExecutiveConfig {
    pub mode: Mode,
    pub plan_horizon_s: Time,
    pub replan_interval_s: Time,
    /// A plan computed at `t` starts at `t + plan_lead_s`.
    pub plan_lead_s: Time,
    /// Ground mode: time between successive station contacts of one satellite.
    pub gs_contact_cadence_s: Option<Time>,
    /// Scheduler time resolution.
    pub plan_step_s: Time,
    pub bundle_interval_s: Time,
    pub network_step_s: Time,
    /// Modeled flight-computer cost of one scheduler candidate evaluation.
    pub eval_cost_s: f64,
    pub hardware_slowdown: f64,
}

impl Default for ExecutiveConfig {
    fn default() -> Self {
        ExecutiveConfig {
            mode: Mode::Onboard,
            plan_horizon_s: 600,
            replan_interval_s: 300,
            plan_lead_s: 60,
            gs_contact_cadence_s: None,
            plan_step_s: 1,
            bundle_interval_s: 60,
            network_step_s: 1,
            eval_cost_s: 5e-8,
            hardware_slowdown: 4.0,
        }
    }
}

impl ExecutiveConfig {
    pub fn validate(&self) -> Result<(), ExecutiveError> {
        let bad = |m: &str| Err(ExecutiveError::Config(m.to_string()));
        if self.plan_horizon_s <= 0 || self.replan_interval_s <= 0 {
            return bad("plan_horizon_s and replan_interval_s must be positive");
        }
        if self.mode == Mode::Onboard && self.replan_interval_s > self.plan_horizon_s {
            return bad("replan_interval_s must not exceed plan_horizon_s");
        }
        if self.plan_lead_s < 0 {
            return bad("plan_lead_s must be non-negative");
        }
        if self.plan_step_s <= 0 || self.bundle_interval_s <= 0 || self.network_step_s <= 0 {
            return bad("plan_step_s, bundle_interval_s and network_step_s must be positive");
        }
        if !(self.eval_cost_s >= 0.0 && self.hardware_slowdown > 0.0) {
            return bad("eval_cost_s must be non-negative and hardware_slowdown positive");
        }
        match (self.mode, self.gs_contact_cadence_s) {
            (Mode::Ground, None) => bad("ground mode needs gs_contact_cadence_s"),
            (Mode::Ground, Some(c)) if c <= 0 => bad("gs_contact_cadence_s must be positive"),
            _ => Ok(()),
        }
    }

    /// Flight-computer time for a scheduler run with `evaluations` candidate checks.
    pub fn modeled_runtime_s(&self, evaluations: u64) -> f64 {
        evaluations as f64 * self.eval_cost_s * self.hardware_slowdown
    }

    /// Most evaluations whose modeled runtime fits within the plan lead.
    pub fn evaluation_budget(&self) -> u64 {
        let lead = self.plan_lead_s as f64;
        let mut n = (lead / (self.eval_cost_s * self.hardware_slowdown)).floor() as u64;
        while self.modeled_runtime_s(n + 1) <= lead {
            n += 1;
        }
        while n > 0 && self.modeled_runtime_s(n) > lead {
            n -= 1;
        }
        n
    }
}

/// Sensor pointing and geometry choices of a mission, independent of the scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MissionSpec {
    pub for_half_angle_deg: f64,
    pub slew: SlewModel,
    /// Replaces agility with a nadir-fixed instrument of this footprint radius.
    pub nadir_footprint_km: Option<f64>,
    pub stations: Vec<GroundStation>,
    pub contact: ContactParams,
    pub contact_step_s: Time,
    pub access_step_s: Time,
    pub network: NetworkParams,
    pub predictor: PredictorParams,
    pub scheduler: SchedulerParams,
}

impl Default for MissionSpec {
    fn default() -> Self {
        MissionSpec {
            for_half_angle_deg: 55.0,
            slew: SlewModel::default(),
            nadir_footprint_km: None,
            stations: Vec::new(),
            contact: ContactParams::default(),
            contact_step_s: 10,
            access_step_s: 10,
            network: NetworkParams::default(),
            predictor: PredictorParams::default(),
            scheduler: SchedulerParams::default(),
        }
    }
}

impl MissionSpec {
    /// Field-of-regard half-angle and slew model actually flown.
    pub fn pointing(&self, altitude_km: f64) -> (f64, SlewModel) {
        match self.nadir_footprint_km {
            Some(r) => ((r / altitude_km).atan().to_degrees(), SlewModel::body_fixed()),
            None => (self.for_half_angle_deg, self.slew),
        }
    }
}

/// Precomputed geometry, contacts and region passes for one scenario.
pub struct Mission<'a> {
    pub scenario: &'a Scenario,
    pub constellation: Vec<OrbitalElements>,
    pub geometry: Geometry,
    pub contacts: ContactPlan,
    pub passes: Vec<RegionPass>,
    pub gaps: Vec<AccessGap>,
    pub spec: MissionSpec,
}

impl<'a> Mission<'a> {
    pub fn build(scenario: &'a Scenario, constellation: Vec<OrbitalElements>, spec: MissionSpec) -> Result<Self, ExecutiveError> {
        let span = (0, scenario.horizon_s);
        let altitude = constellation.first().map_or(700.0, |e| e.altitude_km());
        let (for_deg, slew) = spec.pointing(altitude);
        slew.validate().map_err(|e| ExecutiveError::Config(e.to_string()))?;
        let geometry = Geometry::new(&constellation, &scenario.geography, span, for_deg, slew)?;
        // steps that do not divide the horizon fall back to 1 s
        let step = |s: Time| if s > 0 && scenario.horizon_s % s == 0 { s } else { 1 };
        let contacts = compute_contacts(&constellation, &spec.stations, span, step(spec.contact_step_s), spec.contact)?;
        let access_step = step(spec.access_step_s);
        let mut passes = Vec::new();
        for (i, e) in constellation.iter().enumerate() {
            for g in &scenario.geography.grids {
                passes.extend(region_passes(SatId(i as u32), e, g, span, for_deg, access_step)?);
            }
        }
        passes.sort_by_key(|p| (p.start, p.sat, p.region));
        let mut gaps = Vec::new();
        for g in &scenario.geography.grids {
            let rp: Vec<RegionPass> = passes.iter().filter(|p| p.region == g.region).cloned().collect();
            gaps.extend(gaps_from_passes(&rp));
        }
        Ok(Mission { scenario, constellation, geometry, contacts, passes, gaps, spec })
    }

    pub fn sats(&self) -> Vec<SatId> {
        (0..self.constellation.len() as u32).map(SatId).collect()
    }
}

/// One executed observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub sat: SatId,
    pub gp: GpId,
    pub t: Time,
    pub slot: usize,
    pub region: RegionId,
    pub watershed: WatershedId,
    /// Truth precipitation sampled by the instrument.
    pub precip: f64,
    /// True flood magnitude at the observation.
    pub flood: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub sat: SatId,
    pub t_plan: Time,
    pub window_start: Time,
    pub window_end: Time,
    pub nodes: usize,
    pub value_total: f64,
    pub evaluations: u64,
    pub modeled_runtime_s: f64,
    pub skipped: bool,
    pub fallback: bool,
}

/// A sample some plan relied on, and when its planner learned of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UsedSample {
    pub planner: SatId,
    pub t_plan: Time,
    pub src: SatId,
    pub obs: Obs,
    pub known_since: Time,
}

/// Provenance kept for the causality and additivity audits.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuditTrail {
    /// Samples entering each plan, logged once per planner when first used.
    pub used: Vec<UsedSample>,
    pub bundle_contents: BTreeMap<BundleId, Vec<Obs>>,
    /// Ground mode: (satellite, contact time) of every downlink.
    pub downlinks: Vec<(SatId, Time)>,
    /// Committed plan segments per satellite in commit order.
    pub segments: Vec<(SatId, Time, Vec<Obs>)>,
    /// Planned nodes dropped at execution because the target was out of view.
    pub unobservable: Vec<(SatId, Obs)>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub mode: Mode,
    pub n_sats: usize,
    pub horizon: (Time, Time),
    /// Sorted by (t, sat).
    pub observations: Vec<ObservationRecord>,
    pub plans: Vec<PlanRecord>,
    pub deliveries: Vec<DeliveryRecord>,
    pub trail: AuditTrail,
}

impl RunOutput {
    pub fn executed(&self, sat: SatId) -> Vec<Obs> {
        self.observations.iter().filter(|o| o.sat == sat).map(|o| Obs::new(o.gp, o.t)).collect()
    }
}
