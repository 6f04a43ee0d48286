//! Synthetic truth, perturbed initial estimate and initial value field.

mod estimate;
mod fields;
mod truth;
mod value_map;

pub use estimate::{generate_initial_estimate, perturb_with, region_ratios, EstimateOutput, PerturbationSpec};
pub use fields::{slot_of, FloodField, GpField, PrecipField, ValueFieldInit, WatershedField, SLOT_S};
pub use truth::{
    draw_bumps, generate_truth, rasterize, response_kernel, sample_precip, Bump, KernelParams, ResponseModel,
    TruthOutput, TruthParams,
};
pub use value_map::{value_init, Breakpoints};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::orbits::{assign_watersheds, GridPoint, OrbitError, RegionGrid, RegionSpec};
use crate::rng::substream;
use crate::types::{GpId, RegionId, Time, WatershedId};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario has no regions")]
    NoRegions,
    #[error("region {0} has zero truth precipitation; estimate ratio undefined")]
    ZeroTruth(RegionId),
    #[error("invalid breakpoint table: {0}")]
    BadBreakpoints(String),
    #[error("invalid perturbation spec: {0}")]
    BadPerturbation(String),
    #[error("invalid truth parameters: {0}")]
    BadTruth(String),
    #[error("horizon must be positive, got {0}")]
    BadHorizon(Time),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
}

/// Region grids flattened into one global grid-point index with watershed membership.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geography {
    pub grids: Vec<RegionGrid>,
    /// Indexed by global grid-point id.
    pub points: Vec<GridPoint>,
    pub ws_region: Vec<RegionId>,
    pub ws_members: Vec<Vec<GpId>>,
}

impl Geography {
    pub fn build(specs: &[RegionSpec], watersheds_per_region: usize, seed: u64) -> Result<Self, ScenarioError> {
        let mut rng = substream(seed, "watersheds");
        let mut grids = Vec::with_capacity(specs.len());
        let mut first_gp = 0u32;
        let mut first_ws = 0u32;
        let mut ws_region = Vec::new();
        for (i, spec) in specs.iter().enumerate() {
            let mut g = RegionGrid::build(RegionId(i as u32), spec, first_gp)?;
            let k = assign_watersheds(&mut g, watersheds_per_region, first_ws, &mut rng);
            ws_region.extend(std::iter::repeat_n(g.region, k));
            first_gp += g.points.len() as u32;
            first_ws += k as u32;
            grids.push(g);
        }
        let points: Vec<GridPoint> = grids.iter().flat_map(|g| g.points.iter().cloned()).collect();
        let mut ws_members = vec![Vec::new(); ws_region.len()];
        for p in &points {
            ws_members[p.watershed.index()].push(p.id);
        }
        Ok(Geography { grids, points, ws_region, ws_members })
    }

    pub fn n_gp(&self) -> usize {
        self.points.len()
    }

    pub fn n_ws(&self) -> usize {
        self.ws_region.len()
    }

    pub fn ws_of_gp(&self) -> Vec<u32> {
        self.points.iter().map(|p| p.watershed.0).collect()
    }

    pub fn watershed(&self, gp: GpId) -> WatershedId {
        self.points[gp.index()].watershed
    }

    pub fn region(&self, gp: GpId) -> RegionId {
        self.points[gp.index()].region
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    pub horizon_s: Time,
    #[serde(default = "default_watersheds")]
    pub watersheds_per_region: usize,
    #[serde(default)]
    pub truth: TruthParams,
    #[serde(default)]
    pub perturbation: PerturbationSpec,
    #[serde(default)]
    pub breakpoints: Breakpoints,
}

fn default_watersheds() -> usize {
    4
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            horizon_s: 6 * 3600,
            watersheds_per_region: 4,
            truth: TruthParams::default(),
            perturbation: PerturbationSpec::default(),
            breakpoints: Breakpoints::default(),
        }
    }
}

/// Everything the simulation knows about the world, truth and prior.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub seed: u64,
    pub horizon_s: Time,
    pub slot_s: Time,
    pub geography: Geography,
    pub truth_precip: PrecipField,
    pub true_flood: FloodField,
    pub est_precip: PrecipField,
    pub flood_init: FloodField,
    pub value_init: ValueFieldInit,
    pub response: ResponseModel,
    pub breakpoints: Breakpoints,
    /// Σ estimate / Σ truth precipitation per region.
    pub ratios: Vec<f64>,
}

impl Scenario {
    pub fn generate(regions: &[RegionSpec], params: &ScenarioParams, seed: u64) -> Result<Self, ScenarioError> {
        if regions.is_empty() {
            return Err(ScenarioError::NoRegions);
        }
        if params.horizon_s <= 0 {
            return Err(ScenarioError::BadHorizon(params.horizon_s));
        }
        let geography = Geography::build(regions, params.watersheds_per_region, seed)?;
        let truth = generate_truth(&geography, params.horizon_s, SLOT_S, &params.truth, seed)?;
        let est = generate_initial_estimate(&geography, &truth.precip, &truth.response, &params.perturbation, seed)?;
        let value_init = value_init(&est.flood_init, &params.breakpoints);
        Ok(Scenario {
            seed,
            horizon_s: params.horizon_s,
            slot_s: SLOT_S,
            geography,
            truth_precip: truth.precip,
            true_flood: truth.flood,
            est_precip: est.precip,
            flood_init: est.flood_init,
            value_init,
            response: truth.response,
            breakpoints: params.breakpoints.clone(),
            ratios: est.ratios,
        })
    }

    pub fn n_slots(&self) -> usize {
        self.truth_precip.n_slots
    }

    /// Hex sha256 over grid geometry and every field, for run provenance.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(self.horizon_s.to_le_bytes());
        for p in &self.geography.points {
            h.update(p.id.0.to_le_bytes());
            h.update(p.watershed.0.to_le_bytes());
            h.update(p.lat_deg.to_le_bytes());
            h.update(p.lon_deg.to_le_bytes());
        }
        for field in [&self.truth_precip.values, &self.est_precip.values, &self.true_flood.values, &self.flood_init.values] {
            for v in field.iter() {
                h.update(v.to_le_bytes());
            }
        }
        h.update(&self.value_init.values);
        hex::encode(h.finalize())
    }
}
