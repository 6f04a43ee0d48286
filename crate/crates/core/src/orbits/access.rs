use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::elements::{propagate, OrbitalElements, EARTH_RADIUS_KM};
use super::grid::RegionGrid;
use super::OrbitError;
use crate::types::{GpId, RegionId, SatId, Time};

/// Contiguous interval `[start, end)` during which `gp` lies inside the
/// satellite's field of regard. `off_nadir_deg[k]` is sampled at `start + k * step`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccessWindow {
    pub sat: SatId,
    pub gp: GpId,
    pub start: Time,
    pub end: Time,
    pub step: Time,
    pub off_nadir_deg: Vec<f64>,
}

/// Region-level access: any grid point of the region is in the field of regard.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionPass {
    pub sat: SatId,
    pub region: RegionId,
    pub start: Time,
    pub end: Time,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessGap {
    pub region: RegionId,
    pub from: SatId,
    pub to: SatId,
    pub gap: Time,
}

/// Angle at the satellite between nadir and the line of sight to `target`.
pub fn off_nadir_deg(sat: &Vector3<f64>, target: &Vector3<f64>) -> f64 {
    let los = target - sat;
    let cos = (-sat).dot(&los) / (sat.norm() * los.norm());
    cos.clamp(-1.0, 1.0).acos().to_degrees()
}

fn above_horizon(sat: &Vector3<f64>, target: &Vector3<f64>) -> bool {
    (sat - target).dot(target) > 0.0
}

pub fn in_field_of_regard(sat: &Vector3<f64>, target: &Vector3<f64>, half_angle_deg: f64) -> bool {
    above_horizon(sat, target) && off_nadir_deg(sat, target) <= half_angle_deg
}

/// Earth central angle (rad) between the sub-satellite point and the edge
/// of a field of regard with the given off-nadir half-angle.
pub fn central_angle_for_off_nadir(semi_major_axis_km: f64, half_angle_deg: f64) -> f64 {
    let eta = half_angle_deg.to_radians();
    let s = semi_major_axis_km / EARTH_RADIUS_KM * eta.sin();
    if s >= 1.0 {
        (EARTH_RADIUS_KM / semi_major_axis_km).acos()
    } else {
        s.asin() - eta
    }
}

fn check_horizon(horizon: (Time, Time), step: Time) -> Result<(), OrbitError> {
    let (start, end) = horizon;
    if step <= 0 || end < start || (end - start) % step != 0 {
        return Err(OrbitError::BadTimestep { start, end, step });
    }
    Ok(())
}

/// Cheap rejection of time steps where the region is certainly out of reach.
struct RegionFilter {
    center: Vector3<f64>,
    cos_limit: f64,
}

impl RegionFilter {
    fn new(elements: &OrbitalElements, grid: &RegionGrid, half_angle_deg: f64) -> Self {
        let reach = central_angle_for_off_nadir(elements.semi_major_axis_km, half_angle_deg);
        let limit = (reach + grid.angular_radius() + 0.01).min(std::f64::consts::PI);
        RegionFilter { center: grid.center_ecef().normalize(), cos_limit: limit.cos() }
    }

    fn maybe_visible(&self, sat: &Vector3<f64>) -> bool {
        sat.normalize().dot(&self.center) >= self.cos_limit
    }
}

/// Field-of-regard access windows of one satellite over every grid point.
pub fn compute_access(
    sat: SatId,
    elements: &OrbitalElements,
    grid: &RegionGrid,
    horizon: (Time, Time),
    for_half_angle_deg: f64,
    timestep: Time,
) -> Result<Vec<AccessWindow>, OrbitError> {
    if !(for_half_angle_deg > 0.0 && for_half_angle_deg < 90.0) {
        return Err(OrbitError::BadFieldOfRegard(for_half_angle_deg));
    }
    check_horizon(horizon, timestep)?;
    if grid.points.is_empty() {
        return Ok(Vec::new());
    }
    let filter = RegionFilter::new(elements, grid, for_half_angle_deg);
    let targets: Vec<Vector3<f64>> = grid.points.iter().map(|p| p.ecef()).collect();
    let mut open: Vec<Option<AccessWindow>> = vec![None; targets.len()];
    let mut done = Vec::new();
    let mut t = horizon.0;
    while t < horizon.1 {
        let pos = propagate(elements, t as f64);
        let visible = filter.maybe_visible(&pos);
        for (i, target) in targets.iter().enumerate() {
            let inside = visible && in_field_of_regard(&pos, target, for_half_angle_deg);
            match (&mut open[i], inside) {
                (Some(w), true) => w.off_nadir_deg.push(off_nadir_deg(&pos, target)),
                (None, true) => {
                    open[i] = Some(AccessWindow {
                        sat,
                        gp: grid.points[i].id,
                        start: t,
                        end: t,
                        step: timestep,
                        off_nadir_deg: vec![off_nadir_deg(&pos, target)],
                    })
                }
                (Some(_), false) => {
                    let mut w = open[i].take().unwrap();
                    w.end = t;
                    done.push(w);
                }
                (None, false) => {}
            }
        }
        t += timestep;
    }
    for w in open.into_iter().flatten() {
        done.push(AccessWindow { end: horizon.1, ..w });
    }
    done.sort_by_key(|w| (w.start, w.gp));
    Ok(done)
}

/// Intervals during which any point of the region is inside the field of regard.
pub fn region_passes(
    sat: SatId,
    elements: &OrbitalElements,
    grid: &RegionGrid,
    horizon: (Time, Time),
    for_half_angle_deg: f64,
    timestep: Time,
) -> Result<Vec<RegionPass>, OrbitError> {
    check_horizon(horizon, timestep)?;
    let filter = RegionFilter::new(elements, grid, for_half_angle_deg);
    let targets: Vec<Vector3<f64>> = grid.points.iter().map(|p| p.ecef()).collect();
    let mut passes = Vec::new();
    let mut open: Option<Time> = None;
    let mut t = horizon.0;
    while t < horizon.1 {
        let pos = propagate(elements, t as f64);
        let inside = filter.maybe_visible(&pos)
            && targets.iter().any(|g| in_field_of_regard(&pos, g, for_half_angle_deg));
        match (open, inside) {
            (None, true) => open = Some(t),
            (Some(start), false) => {
                passes.push(RegionPass { sat, region: grid.region, start, end: t });
                open = None;
            }
            _ => {}
        }
        t += timestep;
    }
    if let Some(start) = open {
        passes.push(RegionPass { sat, region: grid.region, start, end: horizon.1 });
    }
    Ok(passes)
}

/// Union of per-grid-point windows into one region-level interval list per satellite.
pub fn merge_region_passes(region: RegionId, windows: &[AccessWindow]) -> Vec<RegionPass> {
    let mut sorted: Vec<&AccessWindow> = windows.iter().collect();
    sorted.sort_by_key(|w| (w.sat, w.start, w.end));
    let mut out: Vec<RegionPass> = Vec::new();
    for w in sorted {
        match out.last_mut() {
            Some(p) if p.sat == w.sat && w.start <= p.end => p.end = p.end.max(w.end),
            _ => out.push(RegionPass { sat: w.sat, region, start: w.start, end: w.end }),
        }
    }
    out.sort_by_key(|p| (p.start, p.sat));
    out
}

/// Gaps between consecutive region accesses by distinct satellites. Overlapping
/// accesses report a gap of zero.
pub fn gaps_from_passes(passes: &[RegionPass]) -> Vec<AccessGap> {
    let mut sorted = passes.to_vec();
    sorted.sort_by_key(|p| (p.start, p.sat));
    sorted
        .windows(2)
        .filter(|w| w[0].sat != w[1].sat)
        .map(|w| AccessGap {
            region: w[1].region,
            from: w[0].sat,
            to: w[1].sat,
            gap: (w[1].start - w[0].end).max(0),
        })
        .collect()
}

pub fn region_access_gaps(region: RegionId, windows: &[AccessWindow]) -> Vec<AccessGap> {
    gaps_from_passes(&merge_region_passes(region, windows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::{geodetic_to_ecef, OrbitalElements, RegionSpec};

    const A: f64 = EARTH_RADIUS_KM + 710.0;

    fn sat_over(lat: f64, lon: f64) -> Vector3<f64> {
        geodetic_to_ecef(lat, lon) * (A / EARTH_RADIUS_KM)
    }

    /// Spherical-triangle oracle: sin(rho) = Re / (Re + h), cos(eps) = sin(eta) / sin(rho),
    /// lambda = 90 - eta - eps.
    fn access_radius_oracle_deg(eta_deg: f64) -> f64 {
        let rho = (EARTH_RADIUS_KM / A).asin();
        let eps = (eta_deg.to_radians().sin() / rho.sin()).acos();
        90.0 - eta_deg - eps.to_degrees()
    }

    #[test]
    fn field_of_regard_edge_matches_geometry_oracle() {
        let lambda = access_radius_oracle_deg(55.0);
        assert!((lambda - central_angle_for_off_nadir(A, 55.0).to_degrees()).abs() < 1e-9);
        let sat = sat_over(0.0, 0.0);
        assert!(in_field_of_regard(&sat, &geodetic_to_ecef(lambda - 0.01, 0.0), 55.0));
        assert!(!in_field_of_regard(&sat, &geodetic_to_ecef(lambda + 0.01, 0.0), 55.0));
        // about 1170 km of ground range
        let km = lambda.to_radians() * EARTH_RADIUS_KM;
        assert!((1100.0..1250.0).contains(&km), "{km}");
    }

    #[test]
    fn nadir_point_is_inside_and_antipode_is_not() {
        let sat = sat_over(10.0, 20.0);
        assert!(off_nadir_deg(&sat, &geodetic_to_ecef(10.0, 20.0)) < 1e-6);
        assert!(in_field_of_regard(&sat, &geodetic_to_ecef(10.0, 20.0), 55.0));
        assert!(!in_field_of_regard(&sat, &geodetic_to_ecef(-10.0, -160.0), 89.0));
    }

    #[test]
    fn access_monotone_in_half_angle() {
        let e = OrbitalElements::new(A, 98.5, 260.0, 0.0, 0.0).unwrap();
        let spec = RegionSpec { name: "x".into(), lat_deg: 20.0, lon_deg: -100.0, extent_km: 80.0, resolution_km: 20.0 };
        let grid = RegionGrid::build(RegionId(0), &spec, 0).unwrap();
        let narrow = compute_access(SatId(0), &e, &grid, (0, 6000), 30.0, 10).unwrap();
        let wide = compute_access(SatId(0), &e, &grid, (0, 6000), 55.0, 10).unwrap();
        assert!(!wide.is_empty());
        for w in &narrow {
            assert!(wide.iter().any(|v| v.gp == w.gp && v.start <= w.start && v.end >= w.end));
        }
        for w in &wide {
            assert!(w.start < w.end);
            assert!(w.off_nadir_deg.iter().all(|&a| a <= 55.0));
            assert_eq!(w.off_nadir_deg.len() as i64, (w.end - w.start) / w.step);
        }
    }

    #[test]
    fn empty_grid_and_bad_inputs() {
        let e = OrbitalElements::new(A, 98.5, 0.0, 0.0, 0.0).unwrap();
        let spec = RegionSpec { name: "x".into(), lat_deg: 0.0, lon_deg: 0.0, extent_km: 10.0, resolution_km: 5.0 };
        let mut grid = RegionGrid::build(RegionId(0), &spec, 0).unwrap();
        assert!(compute_access(SatId(0), &e, &grid, (0, 100), 0.0, 1).is_err());
        assert!(compute_access(SatId(0), &e, &grid, (0, 100), 55.0, 7).is_err());
        grid.points.clear();
        assert!(compute_access(SatId(0), &e, &grid, (0, 100), 55.0, 1).unwrap().is_empty());
    }

    #[test]
    fn gap_between_two_satellites() {
        let w = |sat, start, end| AccessWindow { sat: SatId(sat), gp: GpId(0), start, end, step: 1, off_nadir_deg: vec![] };
        let gaps = region_access_gaps(RegionId(0), &[w(0, 0, 60), w(1, 600, 660)]);
        assert_eq!(gaps, vec![AccessGap { region: RegionId(0), from: SatId(0), to: SatId(1), gap: 540 }]);
        assert!(region_access_gaps(RegionId(0), &[w(0, 0, 60)]).is_empty());
        // same satellite twice in a row is not a pair
        assert!(region_access_gaps(RegionId(0), &[w(0, 0, 60), w(0, 600, 660)]).is_empty());
    }

    #[test]
    fn region_passes_agree_with_merged_windows() {
        let e = OrbitalElements::new(A, 98.5, 260.0, 0.0, 0.0).unwrap();
        let spec = RegionSpec { name: "x".into(), lat_deg: 20.0, lon_deg: -100.0, extent_km: 80.0, resolution_km: 20.0 };
        let grid = RegionGrid::build(RegionId(0), &spec, 0).unwrap();
        let windows = compute_access(SatId(0), &e, &grid, (0, 6000), 55.0, 5).unwrap();
        let passes = region_passes(SatId(0), &e, &grid, (0, 6000), 55.0, 5).unwrap();
        assert_eq!(merge_region_passes(RegionId(0), &windows), passes);
    }
}
