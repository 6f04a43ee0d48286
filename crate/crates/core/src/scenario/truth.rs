use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fields::{FloodField, PrecipField};
use super::{Geography, ScenarioError};
use crate::rng::substream;
use crate::types::{GpId, RegionId, Time, WatershedId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelParams {
    /// Slots before the response starts.
    pub lag_slots: usize,
    /// e-folding decay of the response, in slots.
    pub decay_slots: f64,
    pub length_slots: usize,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams { lag_slots: 1, decay_slots: 3.0, length_slots: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruthParams {
    pub bumps_per_region: usize,
    /// Mean peak rate of a storm cell, mm per slot.
    pub amplitude_mm: f64,
    pub spatial_sigma_km: [f64; 2],
    pub temporal_sigma_s: [f64; 2],
    /// Range the per-region peak flood magnitude is drawn from.
    pub peak_flood: [f64; 2],
    /// Exponent of flood magnitude in the kernel response; above one, flood
    /// errors exceed the precipitation errors that cause them.
    pub elasticity: f64,
    pub kernel: KernelParams,
}

impl Default for TruthParams {
    fn default() -> Self {
        TruthParams {
            bumps_per_region: 6,
            amplitude_mm: 8.0,
            spatial_sigma_km: [6.0, 20.0],
            temporal_sigma_s: [1800.0, 5400.0],
            peak_flood: [1.5, 2.8],
            elasticity: 1.85,
            kernel: KernelParams::default(),
        }
    }
}

impl TruthParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::BadTruth(m.into()));
        let range_ok = |r: [f64; 2]| r[0] > 0.0 && r[0] <= r[1];
        if !(self.amplitude_mm >= 0.0) {
            return bad("amplitude_mm must be non-negative");
        }
        if !range_ok(self.spatial_sigma_km) || !range_ok(self.temporal_sigma_s) {
            return bad("sigma ranges must be positive and ordered");
        }
        if !(self.peak_flood[0] >= 0.5 && self.peak_flood[1] <= 3.0 && self.peak_flood[0] <= self.peak_flood[1]) {
            return bad("peak_flood must lie within [0.5, 3]");
        }
        if !(self.elasticity > 0.0 && self.elasticity <= 4.0) {
            return bad("elasticity must lie in (0, 4]");
        }
        if self.kernel.length_slots <= self.kernel.lag_slots || !(self.kernel.decay_slots > 0.0) {
            return bad("kernel needs length > lag and positive decay");
        }
        Ok(())
    }
}

/// Space-time Gaussian storm cell in region-local coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub region: RegionId,
    pub east_km: f64,
    pub north_km: f64,
    pub t_center_s: f64,
    pub amplitude: f64,
    pub sigma_km: f64,
    pub sigma_s: f64,
}

/// Watershed response: a causal lagged kernel over watershed-mean
/// precipitation, raised to `elasticity` and scaled per region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseModel {
    pub kernel: Vec<f64>,
    pub region_scale: Vec<f64>,
    pub elasticity: f64,
}

pub fn response_kernel(p: &KernelParams) -> Vec<f64> {
    let mut h: Vec<f64> = (0..p.length_slots)
        .map(|k| if k < p.lag_slots { 0.0 } else { (-((k - p.lag_slots) as f64) / p.decay_slots).exp() })
        .collect();
    let s: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= s);
    h
}

impl ResponseModel {
    /// Kernel convolved with watershed-mean precipitation, before scaling.
    pub fn unscaled(kernel: &[f64], geo: &Geography, precip: &PrecipField) -> FloodField {
        let n_slots = precip.n_slots;
        let mut flood = FloodField::filled(geo.ws_of_gp(), geo.n_ws(), n_slots, precip.slot_s);
        for (w, members) in geo.ws_members.iter().enumerate() {
            let mut mean = vec![0.0; n_slots];
            for &gp in members {
                for (m, v) in mean.iter_mut().zip(precip.series(gp)) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= members.len().max(1) as f64);
            for y in 0..n_slots {
                let mut acc = 0.0;
                for (k, h) in kernel.iter().enumerate().take(y + 1) {
                    acc += h * mean[y - k];
                }
                *flood.get_ws_mut(WatershedId(w as u32), y) = acc;
            }
        }
        flood
    }

    pub fn respond(&self, geo: &Geography, precip: &PrecipField) -> FloodField {
        let mut flood = Self::unscaled(&self.kernel, geo, precip);
        for w in 0..flood.n_ws {
            let s = self.region_scale[geo.ws_region[w].index()];
            for y in 0..flood.n_slots {
                let v = flood.get_ws_mut(WatershedId(w as u32), y);
                *v = s * v.powf(self.elasticity);
            }
        }
        flood
    }
}

pub fn draw_bumps<R: Rng>(geo: &Geography, horizon_s: Time, p: &TruthParams, rng: &mut R) -> Vec<Bump> {
    let mut bumps = Vec::new();
    for grid in &geo.grids {
        let half = grid.extent_km / 2.0;
        for _ in 0..p.bumps_per_region {
            bumps.push(Bump {
                region: grid.region,
                east_km: rng.random_range(-half..=half),
                north_km: rng.random_range(-half..=half),
                t_center_s: rng.random_range(0.0..=0.8 * horizon_s as f64),
                amplitude: p.amplitude_mm * rng.random_range(0.5..=1.5),
                sigma_km: rng.random_range(p.spatial_sigma_km[0]..=p.spatial_sigma_km[1]),
                sigma_s: rng.random_range(p.temporal_sigma_s[0]..=p.temporal_sigma_s[1]),
            });
        }
    }
    bumps
}

/// Precipitation per grid point and slot, sampled at slot midpoints.
pub fn rasterize(geo: &Geography, bumps: &[Bump], n_slots: usize, slot_s: Time) -> PrecipField {
    let mut field = PrecipField::zeros(geo.n_gp(), n_slots, slot_s);
    for b in bumps {
        for p in &geo.grids[b.region.index()].points {
            let d2 = (p.east_km - b.east_km).powi(2) + (p.north_km - b.north_km).powi(2);
            let space = (-d2 / (2.0 * b.sigma_km * b.sigma_km)).exp();
            if space < 1e-12 {
                continue;
            }
            for y in 0..n_slots {
                let tm = (y as f64 + 0.5) * slot_s as f64;
                let time = (-(tm - b.t_center_s).powi(2) / (2.0 * b.sigma_s * b.sigma_s)).exp();
                *field.get_mut(p.id, y) += b.amplitude * space * time;
            }
        }
    }
    field
}

#[derive(Clone, Debug)]
pub struct TruthOutput {
    pub precip: PrecipField,
    pub flood: FloodField,
    pub response: ResponseModel,
    pub bumps: Vec<Bump>,
}

pub fn generate_truth(
    geo: &Geography,
    horizon_s: Time,
    slot_s: Time,
    params: &TruthParams,
    seed: u64,
) -> Result<TruthOutput, ScenarioError> {
    if geo.grids.is_empty() {
        return Err(ScenarioError::NoRegions);
    }
    params.validate()?;
    let n_slots = (horizon_s.max(1) as usize).div_ceil(slot_s as usize);
    let mut rng = substream(seed, "truth");
    let bumps = draw_bumps(geo, horizon_s, params, &mut rng);
    let precip = rasterize(geo, &bumps, n_slots, slot_s);
    let kernel = response_kernel(&params.kernel);
    let raw = ResponseModel::unscaled(&kernel, geo, &precip);
    let mut region_scale = Vec::with_capacity(geo.grids.len());
    for grid in &geo.grids {
        let peak = (0..raw.n_ws)
            .filter(|&w| geo.ws_region[w] == grid.region)
            .flat_map(|w| (0..n_slots).map(move |y| (w, y)))
            .map(|(w, y)| raw.get_ws(WatershedId(w as u32), y))
            .fold(0.0f64, f64::max)
            .powf(params.elasticity);
        let target = rng.random_range(params.peak_flood[0]..=params.peak_flood[1]);
        region_scale.push(if peak > 0.0 { target / peak } else { 1.0 });
    }
    let response = ResponseModel { kernel, region_scale, elasticity: params.elasticity };
    let flood = response.respond(geo, &precip);
    Ok(TruthOutput { precip, flood, response, bumps })
}

/// Truth precipitation sample an instrument would report at (gp, t).
pub fn sample_precip(precip: &PrecipField, gp: GpId, t: Time) -> f64 {
    precip.at_time(gp, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::RegionSpec;

    fn geo() -> Geography {
        let specs = vec![
            RegionSpec { name: "a".into(), lat_deg: 10.0, lon_deg: 20.0, extent_km: 80.0, resolution_km: 8.0 },
            RegionSpec { name: "b".into(), lat_deg: -30.0, lon_deg: 150.0, extent_km: 80.0, resolution_km: 8.0 },
        ];
        Geography::build(&specs, 4, 7).unwrap()
    }

    #[test]
    fn kernel_is_causal_lagged_and_normalized() {
        let h = response_kernel(&KernelParams { lag_slots: 2, decay_slots: 3.0, length_slots: 10 });
        assert_eq!(h[0], 0.0);
        assert_eq!(h[1], 0.0);
        assert!(h[2] > h[3]);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_amplitude_gives_zero_flood() {
        let p = TruthParams { amplitude_mm: 0.0, ..Default::default() };
        let out = generate_truth(&geo(), 7200, 900, &p, 1).unwrap();
        assert!(out.flood.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_region_set_rejected() {
        let g = Geography::build(&[], 4, 1).unwrap();
        assert!(matches!(generate_truth(&g, 3600, 900, &TruthParams::default(), 1), Err(ScenarioError::NoRegions)));
    }

    #[test]
    fn peak_within_flood_ratio_range() {
        let g = geo();
        let out = generate_truth(&g, 6 * 3600, 900, &TruthParams::default(), 3).unwrap();
        for grid in &g.grids {
            let peak = grid.points.iter().flat_map(|p| (0..out.flood.n_slots).map(|y| out.flood.get(p.id, y))).fold(0.0, f64::max);
            assert!((0.5..=3.0).contains(&peak), "{peak}");
        }
        assert!(out.precip.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn watershed_constancy() {
        let g = geo();
        let out = generate_truth(&g, 7200, 900, &TruthParams::default(), 3).unwrap();
        for members in &g.ws_members {
            for y in 0..out.flood.n_slots {
                let v = out.flood.get(members[0], y);
                assert!(members.iter().all(|&gp| out.flood.get(gp, y) == v));
            }
        }
    }

    #[test]
    fn single_bump_peaks_in_its_watershed_after_lag() {
        let g = geo();
        let w = 2usize;
        let members = &g.ws_members[w];
        let (ce, cn) = members.iter().fold((0.0, 0.0), |a, &gp| {
            let p = &g.points[gp.index()];
            (a.0 + p.east_km / members.len() as f64, a.1 + p.north_km / members.len() as f64)
        });
        let bump = Bump { region: g.ws_region[w], east_km: ce, north_km: cn, t_center_s: 4.5 * 900.0, amplitude: 10.0, sigma_km: 3.0, sigma_s: 60.0 };
        let n_slots = 12;
        let precip = rasterize(&g, &[bump], n_slots, 900);
        let kp = KernelParams { lag_slots: 2, decay_slots: 2.0, length_slots: 8 };
        let kernel = response_kernel(&kp);
        let flood = ResponseModel::unscaled(&kernel, &g, &precip);

        // direct convolution oracle on the watershed mean
        let mean: Vec<f64> = (0..n_slots)
            .map(|y| members.iter().map(|&gp| precip.get(gp, y)).sum::<f64>() / members.len() as f64)
            .collect();
        for y in 0..n_slots {
            let mut want = 0.0;
            for k in 0..kernel.len() {
                if k <= y {
                    want += kernel[k] * mean[y - k];
                }
            }
            assert!((flood.get_ws(WatershedId(w as u32), y) - want).abs() < 1e-12);
        }
        let (best_ws, best_y) = (0..flood.n_ws)
            .flat_map(|ws| (0..n_slots).map(move |y| (ws, y)))
            .max_by(|a, b| {
                flood.get_ws(WatershedId(a.0 as u32), a.1).total_cmp(&flood.get_ws(WatershedId(b.0 as u32), b.1))
            })
            .unwrap();
        assert_eq!(best_ws, w);
        assert_eq!(best_y, 4 + kp.lag_slots);
    }

    #[test]
    fn deterministic() {
        let g = geo();
        let a = generate_truth(&g, 7200, 900, &TruthParams::default(), 11).unwrap();
        let b = generate_truth(&g, 7200, 900, &TruthParams::default(), 11).unwrap();
        assert_eq!(a.precip, b.precip);
        assert_eq!(a.flood, b.flood);
        let c = generate_truth(&g, 7200, 900, &TruthParams::default(), 12).unwrap();
        assert_ne!(a.precip, c.precip);
    }

    #[test]
    fn response_scales_with_elasticity() {
        let g = geo();
        for elasticity in [1.0, 1.85] {
            let p = TruthParams { elasticity, ..Default::default() };
            let out = generate_truth(&g, 7200, 900, &p, 5).unwrap();
            let mut scaled = out.precip.clone();
            scaled.values.iter_mut().for_each(|v| *v *= 2.5);
            let f2 = out.response.respond(&g, &scaled);
            let k = 2.5f64.powf(elasticity);
            for (a, b) in out.flood.values.iter().zip(&f2.values) {
                assert!((k * a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
    }
}
