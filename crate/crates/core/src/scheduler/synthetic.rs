use nalgebra::Vector3;
use rand::Rng;

use super::PlanningProblem;
use crate::attitude::SlewModel;
use crate::predictor::ValueField;
use crate::rng::substream;
use crate::scenario::ValueFieldInit;
use crate::types::{GpId, SatId, Time};

/// Satellite flying a straight line over a flat ground plane.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSat {
    pub x0_km: f64,
    pub y_km: f64,
    pub speed_km_s: f64,
}

/// Small flat-Earth planning instance for tests, benchmarks and the oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticProblem {
    pub horizon: (Time, Time),
    pub altitude_km: f64,
    pub sats: Vec<SyntheticSat>,
    /// Ground coordinates (x, y) in km.
    pub gps: Vec<(f64, f64)>,
    pub slew: SlewModel,
    pub for_half_angle_deg: f64,
}

impl SyntheticProblem {
    /// One satellite passing over grid points placed on its ground track.
    pub fn line(xs: Vec<f64>, n_t: Time, slew: SlewModel) -> Self {
        SyntheticProblem {
            horizon: (0, n_t),
            altitude_km: 500.0,
            sats: vec![SyntheticSat { x0_km: -30.0, y_km: 0.0, speed_km_s: 7.0 }],
            gps: xs.into_iter().map(|x| (x, 0.0)).collect(),
            slew,
            for_half_angle_deg: 55.0,
        }
    }

    /// Seeded random instance. With `overlap` the satellites share a ground
    /// track neighborhood; otherwise they are too far apart to compete.
    pub fn random(seed: u64, n_sats: usize, n_gp: usize, n_t: Time, overlap: bool) -> (Self, ValueField) {
        let mut rng = substream(seed, "synthetic-instance");
        let gps = (0..n_gp).map(|_| (rng.random_range(-150.0..150.0), rng.random_range(-150.0..150.0))).collect();
        let sats = (0..n_sats)
            .map(|i| SyntheticSat {
                x0_km: rng.random_range(-120.0..-40.0),
                y_km: if overlap { rng.random_range(-60.0..60.0) } else { i as f64 * 5000.0 + rng.random_range(-60.0..60.0) },
                speed_km_s: 7.0,
            })
            .collect();
        let p = SyntheticProblem {
            horizon: (0, n_t),
            altitude_km: 500.0,
            sats,
            gps,
            slew: SlewModel::new(3.0, 1.5, 2.0).unwrap(),
            for_half_angle_deg: 25.0,
        };
        let n_slots = 4usize;
        let slot_s = (n_t as usize).div_ceil(n_slots).max(1) as Time;
        let mut init = ValueFieldInit::filled((0..n_gp as u32).collect(), n_gp, n_slots, slot_s);
        for v in init.values.iter_mut() {
            *v = rng.random_range(0..=255);
        }
        let field = ValueField::from_init(&init, 900);
        (p, field)
    }

    /// Time-invariant values, one per grid point.
    pub fn uniform_values(&self, values: &[u8]) -> ValueField {
        let n = self.gps.len();
        let mut init = ValueFieldInit::filled((0..n as u32).collect(), n, 1, (self.horizon.1 - self.horizon.0).max(1));
        init.values.copy_from_slice(values);
        ValueField::from_init(&init, 900)
    }

    fn sat_pos(&self, sat: SatId, t: Time) -> Vector3<f64> {
        let s = &self.sats[sat.index()];
        Vector3::new(s.x0_km + s.speed_km_s * (t - self.horizon.0) as f64, s.y_km, self.altitude_km)
    }

    pub fn sat_ids(&self) -> Vec<SatId> {
        (0..self.sats.len() as u32).map(SatId).collect()
    }
}

impl PlanningProblem for SyntheticProblem {
    fn horizon(&self) -> (Time, Time) {
        self.horizon
    }

    fn in_for(&self, sat: SatId, t: Time, out: &mut Vec<GpId>) {
        out.clear();
        let cos_limit = self.for_half_angle_deg.to_radians().cos();
        for i in 0..self.gps.len() {
            let d = self.pointing(sat, GpId(i as u32), t);
            if -d.z >= cos_limit {
                out.push(GpId(i as u32));
            }
        }
    }

    fn pointing(&self, sat: SatId, gp: GpId, t: Time) -> Vector3<f64> {
        let (x, y) = self.gps[gp.index()];
        (Vector3::new(x, y, 0.0) - self.sat_pos(sat, t)).normalize()
    }

    fn slew_model(&self) -> &SlewModel {
        &self.slew
    }

    fn for_half_angle_deg(&self) -> f64 {
        self.for_half_angle_deg
    }
}
