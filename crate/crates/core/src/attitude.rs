//! Slew-time calculator: rest-to-rest single-axis bang-bang maneuver about the
//! eigen-axis between two target-pointing directions, plus a settling time.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbits::ecef_to_eci;
use crate::types::{GpId, SatId, Time};

#[derive(Debug, Error, PartialEq)]
#[error("slew model parameters must be strictly positive (rate {max_rate}, accel {max_accel}, settle {settle})")]
pub struct SlewModelError {
    pub max_rate: f64,
    pub max_accel: f64,
    pub settle: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlewModel {
    pub max_rate_deg_s: f64,
    pub max_accel_deg_s2: f64,
    pub settle_s: f64,
}

impl Default for SlewModel {
    fn default() -> Self {
        SlewModel { max_rate_deg_s: 2.0, max_accel_deg_s2: 1.0, settle_s: 5.0 }
    }
}

impl SlewModel {
    pub fn new(max_rate_deg_s: f64, max_accel_deg_s2: f64, settle_s: f64) -> Result<Self, SlewModelError> {
        let m = SlewModel { max_rate_deg_s, max_accel_deg_s2, settle_s };
        m.validate()?;
        Ok(m)
    }

    /// Body-fixed instrument: pointing follows the spacecraft with no maneuver cost.
    pub fn body_fixed() -> Self {
        SlewModel { max_rate_deg_s: 1e6, max_accel_deg_s2: 1e12, settle_s: 1e-6 }
    }

    pub fn validate(&self) -> Result<(), SlewModelError> {
        if self.max_rate_deg_s > 0.0 && self.max_accel_deg_s2 > 0.0 && self.settle_s > 0.0 {
            Ok(())
        } else {
            Err(SlewModelError { max_rate: self.max_rate_deg_s, max_accel: self.max_accel_deg_s2, settle: self.settle_s })
        }
    }

    /// Angle at which a triangular rate profile just reaches the rate limit.
    pub fn saturation_angle_deg(&self) -> f64 {
        self.max_rate_deg_s.powi(2) / self.max_accel_deg_s2
    }

    /// Maneuver time without settling.
    pub fn maneuver_time(&self, angle_deg: f64) -> f64 {
        let angle = angle_deg.abs();
        let (w, a) = (self.max_rate_deg_s, self.max_accel_deg_s2);
        if angle <= self.saturation_angle_deg() {
            2.0 * (angle / a).sqrt()
        } else {
            angle / w + w / a
        }
    }

    pub fn time_for_angle(&self, angle_deg: f64) -> f64 {
        self.settle_s + self.maneuver_time(angle_deg)
    }

    /// Largest eigen-angle that can be slewed and settled within `dt`, or
    /// `None` when `dt` is shorter than the settling time.
    pub fn max_angle_within(&self, dt: f64) -> Option<f64> {
        let t = dt - self.settle_s;
        if t < 0.0 {
            return None;
        }
        let (w, a) = (self.max_rate_deg_s, self.max_accel_deg_s2);
        Some(if t <= 2.0 * w / a { a * t * t / 4.0 } else { w * (t - w / a) })
    }
}

pub fn eigen_angle_deg(u: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
    (u.dot(v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Positions needed to evaluate target-pointing directions.
pub trait PointingGeometry {
    /// Inertial satellite position at `t`.
    fn sat_eci(&self, sat: SatId, t: Time) -> Vector3<f64>;
    /// Earth-fixed grid point position.
    fn gp_ecef(&self, gp: GpId) -> Vector3<f64>;

    /// Inertial unit vector from the satellite to the grid point at `t`.
    fn pointing(&self, sat: SatId, gp: GpId, t: Time) -> Vector3<f64> {
        (ecef_to_eci(&self.gp_ecef(gp), t as f64) - self.sat_eci(sat, t)).normalize()
    }
}

/// Time to re-point from `gp_before` at `t_before` to `gp_now` at `t_now`,
/// with both directions taken at their own epochs so orbital motion counts.
pub fn slew_time<G: PointingGeometry + ?Sized>(
    geometry: &G,
    sat: SatId,
    gp_before: GpId,
    t_before: Time,
    gp_now: GpId,
    t_now: Time,
    model: &SlewModel,
) -> f64 {
    let u = geometry.pointing(sat, gp_before, t_before);
    let v = geometry.pointing(sat, gp_now, t_now);
    model.time_for_angle(eigen_angle_deg(&u, &v))
}

/// Predecessor window bounds: settling alone, and a maneuver across the full
/// field-of-regard diameter.
pub fn slew_bounds(model: &SlewModel, for_half_angle_deg: f64) -> (f64, f64) {
    (model.settle_s, model.time_for_angle(2.0 * for_half_angle_deg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Independent oracle: the largest angle a rest-to-rest profile covers in
    /// time T is found by simulating the bang-bang rate history, then the
    /// minimum time is located by bisection.
    fn bang_bang_oracle(angle: f64, rate: f64, accel: f64) -> f64 {
        let covered = |total: f64| {
            let n = 20_000;
            let dt = total / n as f64;
            let (mut w, mut th) = (0.0f64, 0.0f64);
            for k in 0..n {
                let remaining = total - k as f64 * dt;
                // decelerate when the remaining time only just suffices to stop
                let a = if w >= remaining * accel { -accel } else if w < rate { accel } else { 0.0 };
                let w_next = (w + a * dt).clamp(0.0, rate);
                th += 0.5 * (w + w_next) * dt;
                w = w_next;
            }
            th
        };
        let (mut lo, mut hi) = (0.0, 1000.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if covered(mid) >= angle { hi = mid } else { lo = mid }
        }
        hi
    }

    struct Frozen {
        sat: Vector3<f64>,
        gps: Vec<Vector3<f64>>,
    }

    impl PointingGeometry for Frozen {
        fn sat_eci(&self, _: SatId, _: Time) -> Vector3<f64> {
            self.sat
        }
        fn gp_ecef(&self, gp: GpId) -> Vector3<f64> {
            self.gps[gp.index()]
        }
        fn pointing(&self, _: SatId, gp: GpId, _: Time) -> Vector3<f64> {
            (self.gps[gp.index()] - self.sat).normalize()
        }
    }

    #[test]
    fn same_target_frozen_costs_settle_only() {
        let g = Frozen { sat: Vector3::new(7000.0, 0.0, 0.0), gps: vec![Vector3::new(6378.0, 10.0, 0.0)] };
        let m = SlewModel::default();
        assert_abs_diff_eq!(slew_time(&g, SatId(0), GpId(0), 0, GpId(0), 30, &m), 5.0, epsilon = 1e-9);
    }

    #[test]
    fn sixty_degrees_matches_bang_bang_oracle() {
        let m = SlewModel::default();
        let oracle = 5.0 + bang_bang_oracle(60.0, 2.0, 1.0);
        // rate-limited branch: 60/2 + 2/1 = 32 s of maneuver
        assert_abs_diff_eq!(m.time_for_angle(60.0), 37.0, epsilon = 1e-12);
        assert!((m.time_for_angle(60.0) - oracle).abs() < 1e-2, "oracle {oracle}");
        // accel-limited branch
        let small = 5.0 + bang_bang_oracle(3.0, 2.0, 1.0);
        assert!((m.time_for_angle(3.0) - small).abs() < 1e-2);
    }

    #[test]
    fn branches_agree_at_rate_saturation() {
        let m = SlewModel::default();
        let b = m.saturation_angle_deg();
        assert_abs_diff_eq!(b, 4.0);
        let accel_branch = 2.0 * (b / m.max_accel_deg_s2).sqrt();
        let rate_branch = b / m.max_rate_deg_s + m.max_rate_deg_s / m.max_accel_deg_s2;
        assert_abs_diff_eq!(accel_branch, rate_branch, epsilon = 1e-12);
        assert_abs_diff_eq!(m.maneuver_time(b - 1e-9), m.maneuver_time(b + 1e-9), epsilon = 1e-6);
    }

    #[test]
    fn bounds() {
        let m = SlewModel::default();
        let (lo, hi) = slew_bounds(&m, 55.0);
        assert_eq!(lo, 5.0);
        assert_abs_diff_eq!(hi, m.time_for_angle(110.0));
        assert_abs_diff_eq!(hi, 5.0 + 55.0 + 2.0);
        let fast = SlewModel::new(1e9, 1e15, 5.0).unwrap();
        assert!(slew_bounds(&fast, 55.0).1 - 5.0 < 1e-6);
        assert!(SlewModel::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn max_angle_inverts_slew_time() {
        let m = SlewModel::default();
        assert_eq!(m.max_angle_within(4.0), None);
        for dt in [5.0, 5.5, 7.0, 9.0, 20.0, 62.0] {
            let a = m.max_angle_within(dt).unwrap();
            assert_abs_diff_eq!(m.time_for_angle(a), dt, epsilon = 1e-9);
        }
    }

    proptest! {
        #[test]
        fn monotone_in_angle(a in 0.0f64..180.0, b in 0.0f64..180.0) {
            let m = SlewModel::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(m.time_for_angle(lo) <= m.time_for_angle(hi));
        }

        #[test]
        fn collinear_triangle(a in 0.0f64..90.0, b in 0.0f64..90.0, rate in 0.5f64..5.0, accel in 0.2f64..3.0) {
            let m = SlewModel::new(rate, accel, 5.0).unwrap();
            let direct = m.time_for_angle(a + b);
            let split = m.time_for_angle(a) + m.time_for_angle(b) - m.settle_s;
            prop_assert!(direct <= split + 1e-9);
        }

        #[test]
        fn in_for_pairs_within_bounds(
            e1 in -1.0f64..1.0, n1 in -1.0f64..1.0, e2 in -1.0f64..1.0, n2 in -1.0f64..1.0,
        ) {
            // two directions inside a 55 deg cone about nadir, seen from one epoch
            let m = SlewModel::default();
            let dir = |e: f64, n: f64| {
                let off = 55f64.to_radians() * (e * e + n * n).sqrt().min(1.0);
                let az = n.atan2(e);
                Vector3::new(-off.cos(), off.sin() * az.cos(), off.sin() * az.sin())
            };
            let angle = eigen_angle_deg(&dir(e1, n1), &dir(e2, n2));
            let (lo, hi) = slew_bounds(&m, 55.0);
            let t = m.time_for_angle(angle);
            prop_assert!(lo <= t && t <= hi + 1e-9);
        }
    }
}
