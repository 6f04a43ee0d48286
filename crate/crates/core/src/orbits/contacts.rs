use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::elements::{geodetic_to_ecef, propagate, OrbitalElements, EARTH_RADIUS_KM};
use super::OrbitError;
use crate::types::{SatId, Time};

/// DTN node: a satellite or a ground station.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    Sat(SatId),
    Ground(u32),
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Sat(s) => write!(f, "{s}"),
            NodeId::Ground(g) => write!(f, "gs{g}"),
        }
    }
}

impl FromStr for NodeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(n) = s.strip_prefix("sat") {
            n.parse().map(|n| NodeId::Sat(SatId(n))).map_err(|_| format!("bad node id {s:?}"))
        } else if let Some(n) = s.strip_prefix("gs") {
            n.parse().map(NodeId::Ground).map_err(|_| format!("bad node id {s:?}"))
        } else {
            Err(format!("bad node id {s:?}"))
        }
    }
}

impl Serialize for NodeId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStation {
    pub name: String,
    pub lat_deg: f64,
    pub lon_deg: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactParams {
    /// Inter-satellite rays must clear the surface by this much.
    pub occlusion_margin_km: f64,
    pub elevation_mask_deg: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        ContactParams { occlusion_margin_km: 100.0, elevation_mask_deg: 10.0 }
    }
}

/// A link opportunity `[start, end)` between two nodes, `a < b`.
/// `ranges_km[k]` is the range at `start + k * step`, floored at 1 m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub a: NodeId,
    pub b: NodeId,
    pub start: Time,
    pub end: Time,
    pub step: Time,
    pub ranges_km: Vec<f64>,
}

impl Contact {
    pub fn active(&self, t: Time) -> bool {
        self.start <= t && t < self.end
    }

    pub fn range_at(&self, t: Time) -> f64 {
        let k = ((t - self.start) / self.step).clamp(0, self.ranges_km.len() as i64 - 1);
        self.ranges_km[k as usize]
    }

    pub fn involves(&self, n: NodeId) -> bool {
        self.a == n || self.b == n
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactPlan {
    pub contacts: Vec<Contact>,
}

impl ContactPlan {
    pub fn between(&self, x: NodeId, y: NodeId) -> impl Iterator<Item = &Contact> {
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        self.contacts.iter().filter(move |c| c.a == a && c.b == b)
    }

    pub fn active_at(&self, t: Time) -> impl Iterator<Item = &Contact> {
        self.contacts.iter().filter(move |c| c.active(t))
    }
}

/// Straight segment between two positions stays `margin_km` above the surface.
pub fn line_of_sight(p: &Vector3<f64>, q: &Vector3<f64>, margin_km: f64) -> bool {
    let d = q - p;
    let len2 = d.norm_squared();
    let s = if len2 > 0.0 { (-p.dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p + s * d).norm() > EARTH_RADIUS_KM + margin_km
}

fn elevation_deg(station: &Vector3<f64>, sat: &Vector3<f64>) -> f64 {
    let los = sat - station;
    let up = station.normalize();
    (los.dot(&up) / los.norm()).clamp(-1.0, 1.0).asin().to_degrees()
}

/// Line-of-sight contact plan over `[horizon.0, horizon.1)` sampled every `timestep`.
pub fn compute_contacts(
    constellation: &[OrbitalElements],
    stations: &[GroundStation],
    horizon: (Time, Time),
    timestep: Time,
    params: ContactParams,
) -> Result<ContactPlan, OrbitError> {
    let (start, end) = horizon;
    if timestep <= 0 || end < start || (end - start) % timestep != 0 {
        return Err(OrbitError::BadTimestep { start, end, step: timestep });
    }
    let gs: Vec<Vector3<f64>> = stations.iter().map(|g| geodetic_to_ecef(g.lat_deg, g.lon_deg)).collect();
    let n = constellation.len();
    let mut pairs: Vec<(NodeId, NodeId)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((NodeId::Sat(SatId(i as u32)), NodeId::Sat(SatId(j as u32))));
        }
    }
    for i in 0..n {
        for g in 0..gs.len() {
            pairs.push((NodeId::Sat(SatId(i as u32)), NodeId::Ground(g as u32)));
        }
    }
    let mut open: Vec<Option<Contact>> = vec![None; pairs.len()];
    let mut done = Vec::new();
    let mut t = start;
    let mut pos = vec![Vector3::zeros(); n];
    while t < end {
        for (i, e) in constellation.iter().enumerate() {
            pos[i] = propagate(e, t as f64);
        }
        for (k, &(a, b)) in pairs.iter().enumerate() {
            let (pa, pb) = match (a, b) {
                (NodeId::Sat(x), NodeId::Sat(y)) => (pos[x.index()], pos[y.index()]),
                (NodeId::Sat(x), NodeId::Ground(g)) => (pos[x.index()], gs[g as usize]),
                _ => unreachable!(),
            };
            let visible = match b {
                NodeId::Sat(_) => line_of_sight(&pa, &pb, params.occlusion_margin_km),
                NodeId::Ground(_) => elevation_deg(&pb, &pa) >= params.elevation_mask_deg,
            };
            let range = (pa - pb).norm().max(1e-3);
            match (&mut open[k], visible) {
                (Some(c), true) => c.ranges_km.push(range),
                (None, true) => {
                    open[k] = Some(Contact { a, b, start: t, end: t, step: timestep, ranges_km: vec![range] })
                }
                (Some(_), false) => {
                    let mut c = open[k].take().unwrap();
                    c.end = t;
                    done.push(c);
                }
                (None, false) => {}
            }
        }
        t += timestep;
    }
    done.extend(open.into_iter().flatten().map(|c| Contact { end, ..c }));
    done.sort_by_key(|c| (c.start, c.a, c.b));
    Ok(ContactPlan { contacts: done })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::{build_walker, propagate};

    const A: f64 = EARTH_RADIUS_KM + 710.0;

    #[test]
    fn co_located_satellites_always_in_contact() {
        let e = OrbitalElements::new(A, 98.5, 0.0, 0.0, 0.0).unwrap();
        let plan = compute_contacts(&[e.clone(), e], &[], (0, 600), 10, ContactParams::default()).unwrap();
        assert_eq!(plan.contacts.len(), 1);
        assert_eq!((plan.contacts[0].start, plan.contacts[0].end), (0, 600));
        assert!(plan.contacts[0].ranges_km.iter().all(|&r| r > 0.0));
    }

    #[test]
    fn opposed_satellites_are_occluded() {
        let a = OrbitalElements::new(A, 98.5, 0.0, 0.0, 0.0).unwrap();
        let b = OrbitalElements::new(A, 98.5, 0.0, 180.0, 0.0).unwrap();
        let plan = compute_contacts(&[a, b], &[], (0, 600), 10, ContactParams::default()).unwrap();
        assert!(plan.contacts.is_empty());
    }

    #[test]
    fn intra_plane_neighbours_in_persistent_contact() {
        // 45 deg in-plane spacing: chord clears the surface by a*cos(22.5 deg) - Re ~ 170 km
        let grazing = A * 22.5f64.to_radians().cos() - EARTH_RADIUS_KM;
        assert!(grazing > 100.0);
        let sats = build_walker(24, 3, 710.0, 98.5, 1).unwrap();
        let plan = compute_contacts(&sats, &[], (0, 6000), 60, ContactParams::default()).unwrap();
        for plane in 0..3u32 {
            for k in 0..8u32 {
                let i = plane * 8 + k;
                let j = plane * 8 + (k + 1) % 8;
                let c: Vec<_> = plan.between(NodeId::Sat(SatId(i)), NodeId::Sat(SatId(j))).collect();
                assert_eq!(c.len(), 1, "pair {i}-{j}");
                assert_eq!((c[0].start, c[0].end), (0, 6000));
            }
        }
        // two slots apart (90 deg) is occluded
        assert_eq!(plan.between(NodeId::Sat(SatId(0)), NodeId::Sat(SatId(2))).count(), 0);
    }

    #[test]
    fn line_of_sight_is_symmetric() {
        let sats = build_walker(6, 2, 710.0, 98.5, 1).unwrap();
        for t in (0..6000).step_by(97) {
            let p: Vec<_> = sats.iter().map(|e| propagate(e, t as f64)).collect();
            for i in 0..p.len() {
                for j in 0..p.len() {
                    assert_eq!(line_of_sight(&p[i], &p[j], 100.0), line_of_sight(&p[j], &p[i], 100.0));
                }
            }
        }
    }

    #[test]
    fn ground_station_contacts_respect_mask() {
        let sats = build_walker(1, 1, 710.0, 98.5, 0).unwrap();
        let gs = GroundStation { name: "svalbard".into(), lat_deg: 78.2, lon_deg: 15.4 };
        let plan = compute_contacts(&sats, std::slice::from_ref(&gs), (0, 86160), 20, ContactParams::default()).unwrap();
        assert!(!plan.contacts.is_empty());
        let station = geodetic_to_ecef(gs.lat_deg, gs.lon_deg);
        for c in &plan.contacts {
            assert_eq!(c.b, NodeId::Ground(0));
            let p = propagate(&sats[0], c.start as f64);
            assert!(elevation_deg(&station, &p) >= 10.0);
            assert!(c.ranges_km.iter().all(|&r| r < 3500.0));
        }
    }

    #[test]
    fn node_id_text_round_trip() {
        for n in [NodeId::Sat(SatId(12)), NodeId::Ground(3)] {
            assert_eq!(n.to_string().parse::<NodeId>().unwrap(), n);
        }
        assert!("station1".parse::<NodeId>().is_err());
    }
}
