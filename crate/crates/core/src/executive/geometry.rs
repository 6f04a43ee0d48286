use std::ops::Range;

use nalgebra::Vector3;

use crate::attitude::{PointingGeometry, SlewModel};
use crate::orbits::{
    central_angle_for_off_nadir, eci_to_ecef, in_field_of_regard, propagate_eci, OrbitError, OrbitalElements,
};
use crate::scenario::Geography;
use crate::scheduler::PlanningProblem;
use crate::types::{GpId, SatId, Time};

struct RegionCone {
    /// Unit vector to the region center, Earth-fixed.
    center: Vector3<f64>,
    /// Per-satellite cosine of the largest satellite-to-center angle that can still see a point.
    cos_limit: Vec<f64>,
    gps: Range<u32>,
}

/// Satellite ephemerides sampled every second and grid-point positions,
/// shared by every planning window of a run.
pub struct Geometry {
    span: (Time, Time),
    eci: Vec<Vec<Vector3<f64>>>,
    ecef: Vec<Vec<Vector3<f64>>>,
    gp_ecef: Vec<Vector3<f64>>,
    regions: Vec<RegionCone>,
    for_half_angle_deg: f64,
    slew: SlewModel,
}

impl Geometry {
    pub fn new(
        constellation: &[OrbitalElements],
        geography: &Geography,
        span: (Time, Time),
        for_half_angle_deg: f64,
        slew: SlewModel,
    ) -> Result<Self, OrbitError> {
        if !(for_half_angle_deg > 0.0 && for_half_angle_deg < 90.0) {
            return Err(OrbitError::BadFieldOfRegard(for_half_angle_deg));
        }
        let mut eci = Vec::with_capacity(constellation.len());
        let mut ecef = Vec::with_capacity(constellation.len());
        for e in constellation {
            let inertial: Vec<Vector3<f64>> = (span.0..span.1).map(|t| propagate_eci(e, t as f64)).collect();
            let fixed = inertial.iter().zip(span.0..).map(|(r, t)| eci_to_ecef(r, t as f64)).collect();
            eci.push(inertial);
            ecef.push(fixed);
        }
        let regions = geography
            .grids
            .iter()
            .map(|g| {
                let first = g.points.first().map_or(0, |p| p.id.0);
                let cos_limit = constellation
                    .iter()
                    .map(|e| {
                        let reach = central_angle_for_off_nadir(e.semi_major_axis_km, for_half_angle_deg);
                        (reach + g.angular_radius() + 0.01).min(std::f64::consts::PI).cos()
                    })
                    .collect();
                RegionCone {
                    center: g.center_ecef().normalize(),
                    cos_limit,
                    gps: first..first + g.points.len() as u32,
                }
            })
            .collect();
        Ok(Geometry {
            span,
            eci,
            ecef,
            gp_ecef: geography.points.iter().map(|p| p.ecef()).collect(),
            regions,
            for_half_angle_deg,
            slew,
        })
    }

    pub fn span(&self) -> (Time, Time) {
        self.span
    }

    pub fn n_sats(&self) -> usize {
        self.eci.len()
    }

    pub fn slew(&self) -> &SlewModel {
        &self.slew
    }

    pub fn for_half_angle_deg(&self) -> f64 {
        self.for_half_angle_deg
    }

    fn index(&self, t: Time) -> Option<usize> {
        (t >= self.span.0 && t < self.span.1).then(|| (t - self.span.0) as usize)
    }

    pub fn sat_ecef(&self, sat: SatId, t: Time) -> Option<Vector3<f64>> {
        self.index(t).map(|i| self.ecef[sat.index()][i])
    }

    /// Whether `gp` lies inside the field of regard of `sat` at `t`.
    pub fn visible(&self, sat: SatId, gp: GpId, t: Time) -> bool {
        self.sat_ecef(sat, t)
            .is_some_and(|p| in_field_of_regard(&p, &self.gp_ecef[gp.index()], self.for_half_angle_deg))
    }

    /// Grid points inside the field of regard, ascending.
    pub fn in_for(&self, sat: SatId, t: Time, out: &mut Vec<GpId>) {
        out.clear();
        let Some(p) = self.sat_ecef(sat, t) else { return };
        let dir = p.normalize();
        for r in &self.regions {
            if dir.dot(&r.center) < r.cos_limit[sat.index()] {
                continue;
            }
            for g in r.gps.clone() {
                if in_field_of_regard(&p, &self.gp_ecef[g as usize], self.for_half_angle_deg) {
                    out.push(GpId(g));
                }
            }
        }
    }

    pub fn problem(&self, horizon: (Time, Time), step: Time) -> GeometryProblem<'_> {
        let horizon = (horizon.0.max(self.span.0), horizon.1.min(self.span.1));
        GeometryProblem { geometry: self, horizon: (horizon.0, horizon.1.max(horizon.0)), step: step.max(1) }
    }
}

impl PointingGeometry for Geometry {
    fn sat_eci(&self, sat: SatId, t: Time) -> Vector3<f64> {
        let i = self.index(t).expect("time inside the ephemeris span");
        self.eci[sat.index()][i]
    }

    fn gp_ecef(&self, gp: GpId) -> Vector3<f64> {
        self.gp_ecef[gp.index()]
    }
}

/// One planning window over real orbits.
pub struct GeometryProblem<'a> {
    geometry: &'a Geometry,
    horizon: (Time, Time),
    step: Time,
}

impl PlanningProblem for GeometryProblem<'_> {
    fn horizon(&self) -> (Time, Time) {
        self.horizon
    }

    fn step(&self) -> Time {
        self.step
    }

    fn in_for(&self, sat: SatId, t: Time, out: &mut Vec<GpId>) {
        self.geometry.in_for(sat, t, out)
    }

    fn pointing(&self, sat: SatId, gp: GpId, t: Time) -> Vector3<f64> {
        PointingGeometry::pointing(self.geometry, sat, gp, t)
    }

    fn slew_model(&self) -> &SlewModel {
        &self.geometry.slew
    }

    fn for_half_angle_deg(&self) -> f64 {
        self.geometry.for_half_angle_deg
    }

    fn in_for_contains(&self, sat: SatId, gp: GpId, t: Time) -> bool {
        self.geometry.visible(sat, gp, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::{compute_access, OrbitalElements, RegionSpec, EARTH_RADIUS_KM};

    fn setup() -> (Vec<OrbitalElements>, Geography) {
        let e = OrbitalElements::new(EARTH_RADIUS_KM + 710.0, 98.5, 0.0, 0.0, 0.0).unwrap();
        let spec = RegionSpec { name: "r".into(), lat_deg: 20.0, lon_deg: -3.0, extent_km: 60.0, resolution_km: 10.0 };
        let geo = Geography::build(&[spec], 2, 1).unwrap();
        (vec![e], geo)
    }

    #[test]
    fn in_for_agrees_with_access_windows() {
        let (sats, geo) = setup();
        let g = Geometry::new(&sats, &geo, (0, 3000), 55.0, SlewModel::default()).unwrap();
        let windows = compute_access(SatId(0), &sats[0], &geo.grids[0], (0, 3000), 55.0, 1).unwrap();
        assert!(!windows.is_empty());
        let mut v = Vec::new();
        for t in (0..3000).step_by(7) {
            g.in_for(SatId(0), t, &mut v);
            let mut want: Vec<GpId> =
                windows.iter().filter(|w| w.start <= t && t < w.end).map(|w| w.gp).collect();
            want.sort();
            assert_eq!(v, want, "t={t}");
        }
    }

    #[test]
    fn problem_clamps_to_span() {
        let (sats, geo) = setup();
        let g = Geometry::new(&sats, &geo, (0, 100), 55.0, SlewModel::default()).unwrap();
        assert_eq!(g.problem((50, 500), 1).horizon(), (50, 100));
        let (a, b) = g.problem((200, 500), 1).horizon();
        assert_eq!(a, b);
        assert!(g.sat_ecef(SatId(0), 100).is_none());
        assert!(Geometry::new(&sats, &geo, (0, 100), 95.0, SlewModel::default()).is_err());
    }
}
