use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EvaluationError;
use crate::predictor::{FloodEstimate, ObsSample, PredictorParams};
use crate::rng::substream;
use crate::scenario::{sample_precip, Scenario};
use crate::types::{GpId, SatId, Time, WatershedId};

/// Hypothetical observation schedules: `n_updates` batches of grid points,
/// each sampled at `frequency` evenly spread slots of the horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErrorGrid {
    pub n_updates: Vec<usize>,
    pub frequencies: Vec<usize>,
    /// Grid points per update batch; an eighth of the grid when unset.
    pub gps_per_update: Option<usize>,
}

impl Default for ErrorGrid {
    fn default() -> Self {
        ErrorGrid { n_updates: (1..=7).collect(), frequencies: vec![1, 2, 4, 8], gps_per_update: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorCell {
    pub n_updates: usize,
    pub frequency: usize,
    pub n_gps: usize,
    pub n_samples: usize,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    /// Error of the uncorrected initial estimate.
    pub baseline: f64,
    pub cells: Vec<ErrorCell>,
}

impl ErrorCurve {
    pub fn get(&self, n_updates: usize, frequency: usize) -> Option<f64> {
        self.cells.iter().find(|c| c.n_updates == n_updates && c.frequency == frequency).map(|c| c.error)
    }

    /// Adjacent grid steps where error rises by more than `tolerance` (relative).
    pub fn increases(&self, tolerance: f64) -> Vec<String> {
        let mut nu: Vec<usize> = self.cells.iter().map(|c| c.n_updates).collect();
        let mut fr: Vec<usize> = self.cells.iter().map(|c| c.frequency).collect();
        nu.sort();
        nu.dedup();
        fr.sort();
        fr.dedup();
        let mut out = Vec::new();
        let mut check = |a: (usize, usize), b: (usize, usize)| {
            if let (Some(ea), Some(eb)) = (self.get(a.0, a.1), self.get(b.0, b.1)) {
                if eb > ea * (1.0 + tolerance) {
                    out.push(format!("error rises {ea:.4} -> {eb:.4} from {a:?} to {b:?}"));
                }
            }
        };
        for &f in &fr {
            for w in nu.windows(2) {
                check((w[0], f), (w[1], f));
            }
        }
        for &n in &nu {
            for w in fr.windows(2) {
                check((n, w[0]), (n, w[1]));
            }
        }
        out
    }
}

/// Normalized error of the causal estimate: each slot is predicted from the
/// samples taken before it.
fn causal_error(scn: &Scenario, samples: &[ObsSample], params: &PredictorParams) -> f64 {
    let init = &scn.flood_init;
    let (mut num, mut den) = (0.0, 0.0);
    for y in 0..scn.n_slots() {
        let cut = y as Time * scn.slot_s;
        let est = FloodEstimate::from_samples(init, &scn.est_precip, samples.iter().filter(|s| s.t < cut), params);
        for w in 0..init.n_ws {
            let w = WatershedId(w as u32);
            let truth = scn.true_flood.get_ws(w, y);
            num += (est.magnitude(init, w, y) - truth).abs();
            den += truth;
        }
    }
    if den > 0.0 { num / den } else { 0.0 }
}

pub fn predictor_error_curve(
    scn: &Scenario,
    params: &PredictorParams,
    grid: &ErrorGrid,
    seed: u64,
) -> Result<ErrorCurve, EvaluationError> {
    if grid.n_updates.is_empty() || grid.frequencies.is_empty() {
        return Err(EvaluationError::EmptyGrid);
    }
    let n_gp = scn.geography.n_gp();
    let per = grid.gps_per_update.unwrap_or((n_gp / 8).max(1));
    let mut order: Vec<GpId> = (0..n_gp as u32).map(GpId).collect();
    order.shuffle(&mut substream(seed, "error-curve"));
    let n_slots = scn.n_slots();
    let mut cells = Vec::new();
    for &nu in &grid.n_updates {
        let gps = &order[..(nu * per).min(n_gp)];
        for &f in &grid.frequencies {
            let f = f.clamp(1, n_slots);
            let slots: Vec<usize> = (0..f).map(|i| i * n_slots / f).collect();
            let samples: Vec<ObsSample> = slots
                .iter()
                .flat_map(|&y| {
                    let t = y as Time * scn.slot_s;
                    gps.iter().map(move |&gp| ObsSample { sat: SatId(0), gp, t, precip: sample_precip(&scn.truth_precip, gp, t) })
                })
                .collect();
            cells.push(ErrorCell {
                n_updates: nu,
                frequency: f,
                n_gps: gps.len(),
                n_samples: samples.len(),
                error: causal_error(scn, &samples, params),
            });
        }
    }
    Ok(ErrorCurve { baseline: causal_error(scn, &[], params), cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::RegionSpec;
    use crate::scenario::{PerturbationSpec, ScenarioParams};

    fn scenario(perturbation: PerturbationSpec) -> Scenario {
        let r = RegionSpec { name: "a".into(), lat_deg: 10.0, lon_deg: 10.0, extent_km: 60.0, resolution_km: 10.0 };
        let p = ScenarioParams { horizon_s: 4 * 3600, watersheds_per_region: 3, perturbation, ..Default::default() };
        Scenario::generate(&[r], &p, 11).unwrap()
    }

    #[test]
    fn perfect_prior_has_zero_error() {
        let scn = scenario(PerturbationSpec::identity());
        let c = predictor_error_curve(&scn, &PredictorParams::default(), &ErrorGrid::default(), 1).unwrap();
        assert!(c.baseline < 1e-9);
        // an exact prior gives r = 1 everywhere, which leaves it unchanged
        assert!(c.cells.iter().all(|x| x.error < 1e-9), "{:?}", c.cells);
    }

    #[test]
    fn grid_shape_and_empty() {
        let scn = scenario(PerturbationSpec::default());
        let c = predictor_error_curve(&scn, &PredictorParams::default(), &ErrorGrid::default(), 1).unwrap();
        assert_eq!(c.cells.len(), 28);
        assert!(c.baseline > 0.0);
        let g = ErrorGrid { n_updates: vec![], ..Default::default() };
        assert_eq!(predictor_error_curve(&scn, &PredictorParams::default(), &g, 1), Err(EvaluationError::EmptyGrid));
    }

    #[test]
    fn increases_detects_rise() {
        let cell = |n, f, e| ErrorCell { n_updates: n, frequency: f, n_gps: 0, n_samples: 0, error: e };
        let c = ErrorCurve { baseline: 1.0, cells: vec![cell(1, 1, 0.5), cell(2, 1, 0.52), cell(1, 2, 0.6), cell(2, 2, 0.4)] };
        assert!(!c.increases(0.05).is_empty());
        assert_eq!(c.increases(0.25).len(), 0);
    }
}
