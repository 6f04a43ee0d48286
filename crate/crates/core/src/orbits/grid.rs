use nalgebra::Vector3;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::elements::{geodetic_to_ecef, EARTH_RADIUS_KM};
use super::OrbitError;
use crate::types::{GpId, RegionId, WatershedId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub id: GpId,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub region: RegionId,
    pub watershed: WatershedId,
    /// Local tangent-plane offsets from the region center.
    pub east_km: f64,
    pub north_km: f64,
}

impl GridPoint {
    pub fn ecef(&self) -> Vector3<f64> {
        geodetic_to_ecef(self.lat_deg, self.lon_deg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub name: String,
    pub lat_deg: f64,
    pub lon_deg: f64,
    #[serde(default = "default_extent")]
    pub extent_km: f64,
    #[serde(default = "default_resolution")]
    pub resolution_km: f64,
}

fn default_extent() -> f64 {
    80.0
}

fn default_resolution() -> f64 {
    0.9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionGrid {
    pub region: RegionId,
    pub name: String,
    pub center_lat_deg: f64,
    pub center_lon_deg: f64,
    pub extent_km: f64,
    pub resolution_km: f64,
    pub points: Vec<GridPoint>,
}

impl RegionGrid {
    /// Square grid of `ceil(extent / resolution)^2` cell centers on the local
    /// tangent plane at the region center. Watersheds start unassigned (all 0).
    pub fn build(region: RegionId, spec: &RegionSpec, first_gp: u32) -> Result<Self, OrbitError> {
        if !(spec.extent_km > 0.0 && spec.resolution_km > 0.0 && spec.resolution_km <= spec.extent_km)
        {
            return Err(OrbitError::BadGrid { extent: spec.extent_km, resolution: spec.resolution_km });
        }
        let n = (spec.extent_km / spec.resolution_km - 1e-9).ceil() as u32;
        let lat0 = spec.lat_deg.to_radians();
        let mut points = Vec::with_capacity((n * n) as usize);
        for row in 0..n {
            for col in 0..n {
                let east = (col as f64 + 0.5) * spec.resolution_km - spec.extent_km / 2.0;
                let north = (row as f64 + 0.5) * spec.resolution_km - spec.extent_km / 2.0;
                let lat = spec.lat_deg + (north / EARTH_RADIUS_KM).to_degrees();
                let lon = spec.lon_deg + (east / (EARTH_RADIUS_KM * lat0.cos())).to_degrees();
                points.push(GridPoint {
                    id: GpId(first_gp + row * n + col),
                    lat_deg: lat.clamp(-90.0, 90.0),
                    lon_deg: wrap_lon(lon),
                    region,
                    watershed: WatershedId(0),
                    east_km: east,
                    north_km: north,
                });
            }
        }
        Ok(RegionGrid {
            region,
            name: spec.name.clone(),
            center_lat_deg: spec.lat_deg,
            center_lon_deg: wrap_lon(spec.lon_deg),
            extent_km: spec.extent_km,
            resolution_km: spec.resolution_km,
            points,
        })
    }

    pub fn center_ecef(&self) -> Vector3<f64> {
        geodetic_to_ecef(self.center_lat_deg, self.center_lon_deg)
    }

    /// Largest central angle (rad) between the center and any grid point.
    pub fn angular_radius(&self) -> f64 {
        let c = self.center_ecef().normalize();
        self.points
            .iter()
            .map(|p| c.dot(&p.ecef().normalize()).clamp(-1.0, 1.0).acos())
            .fold(0.0, f64::max)
    }

    pub fn watershed_ids(&self) -> Vec<WatershedId> {
        let mut ids: Vec<WatershedId> = self.points.iter().map(|p| p.watershed).collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

fn wrap_lon(lon: f64) -> f64 {
    (lon + 180.0).rem_euclid(360.0) - 180.0
}

/// Seeded k-means (Lloyd) on local grid coordinates. Watershed ids are
/// numbered from `first_id` in order of first appearance in the grid.
/// Returns the number of watersheds assigned.
pub fn assign_watersheds<R: Rng>(grid: &mut RegionGrid, k: usize, first_id: u32, rng: &mut R) -> usize {
    let n = grid.points.len();
    if n == 0 {
        return 0;
    }
    let k = k.clamp(1, n);
    let coords: Vec<(f64, f64)> = grid.points.iter().map(|p| (p.east_km, p.north_km)).collect();
    let mut centers: Vec<(f64, f64)> = {
        let mut picks = sample(rng, n, k).into_vec();
        picks.sort_unstable();
        picks.into_iter().map(|i| coords[i]).collect()
    };
    let mut labels = vec![usize::MAX; n];
    for _ in 0..200 {
        let mut changed = false;
        for (i, &(x, y)) in coords.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| {
                    let da = (centers[a].0 - x).powi(2) + (centers[a].1 - y).powi(2);
                    let db = (centers[b].0 - x).powi(2) + (centers[b].1 - y).powi(2);
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .unwrap();
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        let mut sums = vec![(0.0, 0.0, 0usize); k];
        for (i, &(x, y)) in coords.iter().enumerate() {
            let s = &mut sums[labels[i]];
            s.0 += x;
            s.1 += y;
            s.2 += 1;
        }
        for c in 0..k {
            if sums[c].2 > 0 {
                centers[c] = (sums[c].0 / sums[c].2 as f64, sums[c].1 / sums[c].2 as f64);
            } else {
                // empty cluster: move it onto the point farthest from its center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let ca = centers[labels[a]];
                        let cb = centers[labels[b]];
                        let da = (ca.0 - coords[a].0).powi(2) + (ca.1 - coords[a].1).powi(2);
                        let db = (cb.0 - coords[b].0).powi(2) + (cb.1 - coords[b].1).powi(2);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .unwrap();
                centers[c] = coords[far];
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut remap = vec![u32::MAX; k];
    let mut next = 0u32;
    for (i, p) in grid.points.iter_mut().enumerate() {
        let l = labels[i];
        if remap[l] == u32::MAX {
            remap[l] = next;
            next += 1;
        }
        p.watershed = WatershedId(first_id + remap[l]);
    }
    next as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn spec(extent: f64, res: f64) -> RegionSpec {
        RegionSpec { name: "Dallas".into(), lat_deg: 32.78, lon_deg: -96.8, extent_km: extent, resolution_km: res }
    }

    #[test]
    fn default_grid_has_89_squared_points() {
        let g = RegionGrid::build(RegionId(0), &spec(80.0, 0.9), 0).unwrap();
        assert_eq!(g.points.len(), 89 * 89);
        assert!(g.points.iter().all(|p| (-90.0..=90.0).contains(&p.lat_deg)));
        assert!(g.points.iter().all(|p| (-180.0..180.0).contains(&p.lon_deg)));
        // adjacent centers are one resolution apart, up to projection error
        let d = (g.points[0].ecef() - g.points[1].ecef()).norm();
        assert!((d - 0.9).abs() < 0.9 * 0.01, "{d}");
    }

    #[test]
    fn coarse_grid_and_ids_offset() {
        let g = RegionGrid::build(RegionId(3), &spec(80.0, 8.0), 100).unwrap();
        assert_eq!(g.points.len(), 100);
        assert_eq!(g.points[0].id, GpId(100));
        assert_eq!(g.points[99].id, GpId(199));
        assert!(RegionGrid::build(RegionId(0), &spec(80.0, 0.0), 0).is_err());
    }

    #[test]
    fn watersheds_partition_every_point() {
        let mut g = RegionGrid::build(RegionId(0), &spec(80.0, 8.0), 0).unwrap();
        let k = assign_watersheds(&mut g, 4, 10, &mut substream(1, "ws"));
        assert_eq!(k, 4);
        let ids = g.watershed_ids();
        assert_eq!(ids, vec![WatershedId(10), WatershedId(11), WatershedId(12), WatershedId(13)]);
        for id in ids {
            let members = g.points.iter().filter(|p| p.watershed == id).count();
            assert!(members >= 10, "watershed {id} has {members} points");
        }
    }

    #[test]
    fn watersheds_deterministic_by_seed() {
        let mut a = RegionGrid::build(RegionId(0), &spec(80.0, 8.0), 0).unwrap();
        let mut b = a.clone();
        assign_watersheds(&mut a, 4, 0, &mut substream(5, "ws"));
        assign_watersheds(&mut b, 4, 0, &mut substream(5, "ws"));
        assert_eq!(a, b);
    }
}
