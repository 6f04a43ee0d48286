use std::f64::consts::TAU;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::OrbitError;

pub const EARTH_RADIUS_KM: f64 = 6378.14;
pub const MU_EARTH: f64 = 398_600.441_8;
pub const SIDEREAL_DAY_S: f64 = 86_164.0;
/// Earth rotation rate in rad/s.
pub const EARTH_ROTATION_RATE: f64 = TAU / SIDEREAL_DAY_S;

/// Circular orbit elements. Eccentricity is fixed at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitalElements {
    pub semi_major_axis_km: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    pub true_anomaly_deg: f64,
    /// Epoch in simulation seconds.
    pub epoch: f64,
}

impl OrbitalElements {
    pub fn new(
        semi_major_axis_km: f64,
        inclination_deg: f64,
        raan_deg: f64,
        true_anomaly_deg: f64,
        epoch: f64,
    ) -> Result<Self, OrbitError> {
        if !(semi_major_axis_km > EARTH_RADIUS_KM) {
            return Err(OrbitError::BelowSurface(semi_major_axis_km));
        }
        if !(0.0..180.0).contains(&inclination_deg) {
            return Err(OrbitError::BadInclination(inclination_deg));
        }
        Ok(OrbitalElements {
            semi_major_axis_km,
            inclination_deg,
            raan_deg: raan_deg.rem_euclid(360.0),
            true_anomaly_deg: true_anomaly_deg.rem_euclid(360.0),
            epoch,
        })
    }

    pub fn altitude_km(&self) -> f64 {
        self.semi_major_axis_km - EARTH_RADIUS_KM
    }

    /// Mean motion in rad/s.
    pub fn mean_motion(&self) -> f64 {
        (MU_EARTH / self.semi_major_axis_km.powi(3)).sqrt()
    }
}

/// Orbital period from Kepler's third law, in seconds.
pub fn orbital_period(elements: &OrbitalElements) -> f64 {
    TAU / elements.mean_motion()
}

/// Walker-delta constellation description `i: t/p/f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkerSpec {
    pub n_sats: u32,
    pub n_planes: u32,
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub phasing: u32,
    #[serde(default)]
    pub raan_offset_deg: f64,
    #[serde(default)]
    pub anomaly_offset_deg: f64,
}

impl WalkerSpec {
    pub fn build(&self) -> Result<Vec<OrbitalElements>, OrbitError> {
        let WalkerSpec { n_sats, n_planes, phasing, .. } = *self;
        if n_planes == 0 || n_sats == 0 || n_sats % n_planes != 0 {
            return Err(OrbitError::IndivisibleConstellation { n_sats, n_planes });
        }
        if phasing >= n_planes {
            return Err(OrbitError::BadPhasing { phasing, n_planes });
        }
        let per_plane = n_sats / n_planes;
        let a = EARTH_RADIUS_KM + self.altitude_km;
        let mut out = Vec::with_capacity(n_sats as usize);
        for plane in 0..n_planes {
            let raan = self.raan_offset_deg + 360.0 * plane as f64 / n_planes as f64;
            for k in 0..per_plane {
                let anomaly = self.anomaly_offset_deg
                    + 360.0 * k as f64 / per_plane as f64
                    + 360.0 * (phasing * plane) as f64 / n_sats as f64;
                out.push(OrbitalElements::new(a, self.inclination_deg, raan, anomaly, 0.0)?);
            }
        }
        Ok(out)
    }
}

/// Walker-delta constellation, satellites ordered plane by plane.
pub fn build_walker(
    n_sats: u32,
    n_planes: u32,
    altitude_km: f64,
    inclination_deg: f64,
    phasing: u32,
) -> Result<Vec<OrbitalElements>, OrbitError> {
    WalkerSpec {
        n_sats,
        n_planes,
        altitude_km,
        inclination_deg,
        phasing,
        raan_offset_deg: 0.0,
        anomaly_offset_deg: 0.0,
    }
    .build()
}

/// Inertial position (km) under circular two-body motion.
pub fn propagate_eci(elements: &OrbitalElements, t: f64) -> Vector3<f64> {
    let u = elements.true_anomaly_deg.to_radians() + elements.mean_motion() * (t - elements.epoch);
    let (su, cu) = u.sin_cos();
    let (so, co) = elements.raan_deg.to_radians().sin_cos();
    let (si, ci) = elements.inclination_deg.to_radians().sin_cos();
    elements.semi_major_axis_km
        * Vector3::new(co * cu - so * su * ci, so * cu + co * su * ci, su * si)
}

/// Earth-fixed position (km) at simulation time `t`.
pub fn propagate(elements: &OrbitalElements, t: f64) -> Vector3<f64> {
    eci_to_ecef(&propagate_eci(elements, t), t)
}

/// Angle of the Earth-fixed frame relative to inertial; zero at t = 0.
pub fn earth_rotation_angle(t: f64) -> f64 {
    EARTH_ROTATION_RATE * t
}

pub fn eci_to_ecef(r: &Vector3<f64>, t: f64) -> Vector3<f64> {
    let (s, c) = earth_rotation_angle(t).sin_cos();
    Vector3::new(c * r.x + s * r.y, -s * r.x + c * r.y, r.z)
}

pub fn ecef_to_eci(r: &Vector3<f64>, t: f64) -> Vector3<f64> {
    let (s, c) = earth_rotation_angle(t).sin_cos();
    Vector3::new(c * r.x - s * r.y, s * r.x + c * r.y, r.z)
}

/// Point on the spherical Earth surface.
pub fn geodetic_to_ecef(lat_deg: f64, lon_deg: f64) -> Vector3<f64> {
    let (sl, cl) = lat_deg.to_radians().sin_cos();
    let (so, co) = lon_deg.to_radians().sin_cos();
    EARTH_RADIUS_KM * Vector3::new(cl * co, cl * so, sl)
}
