use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::fields::{FloodField, PrecipField};
use super::truth::ResponseModel;
use super::{Geography, ScenarioError};
use crate::rng::substream;
use crate::types::GpId;

/// Lognormal multiplier field with unit mean built from a Gaussian random
/// field (random Fourier features of a squared-exponential covariance).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationSpec {
    /// Standard deviation of the log multiplier.
    pub sigma_log: f64,
    pub correlation_length_km: f64,
    pub correlation_time_s: f64,
    pub n_features: usize,
    /// Per-region log-bias spread, applied on top of the field.
    pub region_bias_sigma_log: f64,
    /// When set, each region's multiplier is rescaled so its realized
    /// estimate-to-truth ratio is drawn uniformly from this range.
    pub ratio_range: Option<[f64; 2]>,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            sigma_log: 0.35,
            correlation_length_km: 20.0,
            correlation_time_s: 7200.0,
            n_features: 48,
            region_bias_sigma_log: 0.0,
            ratio_range: Some([0.55, 1.15]),
        }
    }
}

impl PerturbationSpec {
    pub fn identity() -> Self {
        PerturbationSpec { sigma_log: 0.0, region_bias_sigma_log: 0.0, ratio_range: None, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::BadPerturbation(m.into()));
        if !(self.correlation_length_km > 0.0 && self.correlation_time_s > 0.0) {
            return bad("correlation length and time must be positive");
        }
        if !(self.sigma_log >= 0.0 && self.region_bias_sigma_log >= 0.0) || self.n_features == 0 {
            return bad("sigmas must be non-negative and n_features positive");
        }
        if let Some([lo, hi]) = self.ratio_range {
            if !(lo > 0.0 && lo <= hi) {
                return bad("ratio_range must be positive and ordered");
            }
        }
        Ok(())
    }
}

struct Feature {
    ke: f64,
    kn: f64,
    w: f64,
    phase: f64,
}

fn draw_features<R: Rng>(spec: &PerturbationSpec, rng: &mut R) -> Vec<Feature> {
    let ks = Normal::new(0.0, 1.0 / spec.correlation_length_km).unwrap();
    let ws = Normal::new(0.0, 1.0 / spec.correlation_time_s).unwrap();
    (0..spec.n_features)
        .map(|_| Feature { ke: ks.sample(rng), kn: ks.sample(rng), w: ws.sample(rng), phase: rng.random_range(0.0..TAU) })
        .collect()
}

fn grf(features: &[Feature], e: f64, n: f64, t: f64) -> f64 {
    let s: f64 = features.iter().map(|f| (f.ke * e + f.kn * n + f.w * t + f.phase).cos()).sum();
    s * (2.0 / features.len() as f64).sqrt()
}

/// Applies a multiplier `f(gp, slot)` to every sample.
pub fn perturb_with(truth: &PrecipField, f: impl Fn(GpId, usize) -> f64) -> PrecipField {
    let mut out = truth.clone();
    for gp in 0..truth.n_gp {
        for y in 0..truth.n_slots {
            *out.get_mut(GpId(gp as u32), y) *= f(GpId(gp as u32), y);
        }
    }
    out
}

/// Σ estimate / Σ truth per region.
pub fn region_ratios(geo: &Geography, truth: &PrecipField, est: &PrecipField) -> Result<Vec<f64>, ScenarioError> {
    geo.grids
        .iter()
        .map(|g| {
            let (mut st, mut se) = (0.0, 0.0);
            for p in &g.points {
                st += truth.series(p.id).iter().sum::<f64>();
                se += est.series(p.id).iter().sum::<f64>();
            }
            if st > 0.0 {
                Ok(se / st)
            } else {
                Err(ScenarioError::ZeroTruth(g.region))
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct EstimateOutput {
    pub precip: PrecipField,
    pub flood_init: FloodField,
    pub ratios: Vec<f64>,
}

pub fn generate_initial_estimate(
    geo: &Geography,
    truth: &PrecipField,
    response: &ResponseModel,
    spec: &PerturbationSpec,
    seed: u64,
) -> Result<EstimateOutput, ScenarioError> {
    spec.validate()?;
    let mut rng = substream(seed, "perturbation");
    let bias = Normal::new(0.0, spec.region_bias_sigma_log).unwrap();
    let mut region_factor = Vec::with_capacity(geo.grids.len());
    let mut region_features = Vec::with_capacity(geo.grids.len());
    for _ in &geo.grids {
        region_features.push(draw_features(spec, &mut rng));
        let b = bias.sample(&mut rng);
        region_factor.push((b - 0.5 * spec.region_bias_sigma_log.powi(2)).exp());
    }
    let s = spec.sigma_log;
    let slot_s = truth.slot_s as f64;
    let multiplier = |gp: GpId, y: usize| {
        let p = &geo.points[gp.index()];
        let r = p.region.index();
        let g = if s > 0.0 { grf(&region_features[r], p.east_km, p.north_km, (y as f64 + 0.5) * slot_s) } else { 0.0 };
        (s * g - 0.5 * s * s).exp() * region_factor[r]
    };
    let mut precip = perturb_with(truth, multiplier);
    if let Some([lo, hi]) = spec.ratio_range {
        let raw = region_ratios(geo, truth, &precip)?;
        for (grid, r) in geo.grids.iter().zip(raw) {
            let target = rng.random_range(lo..=hi);
            let c = target / r;
            for p in &grid.points {
                for y in 0..precip.n_slots {
                    *precip.get_mut(p.id, y) *= c;
                }
            }
        }
    }
    let ratios = region_ratios(geo, truth, &precip)?;
    let flood_init = response.respond(geo, &precip);
    Ok(EstimateOutput { precip, flood_init, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::RegionSpec;
    use crate::scenario::truth::{generate_truth, TruthParams};

    fn setup() -> (Geography, crate::scenario::truth::TruthOutput) {
        let specs: Vec<RegionSpec> = (0..5)
            .map(|i| RegionSpec {
                name: format!("r{i}"),
                lat_deg: -40.0 + 20.0 * i as f64,
                lon_deg: 30.0 * i as f64,
                extent_km: 80.0,
                resolution_km: 8.0,
            })
            .collect();
        let g = Geography::build(&specs, 4, 2).unwrap();
        let t = generate_truth(&g, 6 * 3600, 900, &TruthParams::default(), 2).unwrap();
        (g, t)
    }

    #[test]
    fn identity_perturbation() {
        let (g, t) = setup();
        let e = generate_initial_estimate(&g, &t.precip, &t.response, &PerturbationSpec::identity(), 9).unwrap();
        assert_eq!(e.precip, t.precip);
        assert_eq!(e.flood_init, t.flood);
        assert!(e.ratios.iter().all(|&r| (r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn constant_half_multiplier_scales_response() {
        let (g, t) = setup();
        let half = perturb_with(&t.precip, |_, _| 0.5);
        let f = t.response.respond(&g, &half);
        let k = 0.5f64.powf(t.response.elasticity);
        for (a, b) in f.values.iter().zip(&t.flood.values) {
            assert!((a - k * b).abs() <= 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn default_ratios_in_reported_range() {
        let (g, t) = setup();
        let e = generate_initial_estimate(&g, &t.precip, &t.response, &PerturbationSpec::default(), 2).unwrap();
        assert_eq!(e.ratios.len(), 5);
        assert!(e.ratios.iter().all(|r| (0.52..=1.2).contains(r)), "{:?}", e.ratios);
        assert!(e.precip.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn free_field_has_unit_mean_multiplier() {
        let (g, t) = setup();
        let spec = PerturbationSpec { ratio_range: None, n_features: 256, ..Default::default() };
        let ones = perturb_with(&t.precip, |_, _| 1.0);
        let mut flat = ones.clone();
        flat.values.iter_mut().for_each(|v| *v = 1.0);
        let e = generate_initial_estimate(&g, &flat, &t.response, &spec, 4).unwrap();
        let mean = e.precip.values.iter().sum::<f64>() / e.precip.values.len() as f64;
        assert!((mean - 1.0).abs() < 0.15, "{mean}");
    }

    #[test]
    fn zero_truth_is_an_error() {
        let (g, t) = setup();
        let zero = perturb_with(&t.precip, |_, _| 0.0);
        let r = generate_initial_estimate(&g, &zero, &t.response, &PerturbationSpec::default(), 1);
        assert!(matches!(r, Err(ScenarioError::ZeroTruth(_))));
    }

    #[test]
    fn bad_spec_rejected() {
        let spec = PerturbationSpec { correlation_length_km: 0.0, ..Default::default() };
        assert!(spec.validate().is_err());
    }
}
