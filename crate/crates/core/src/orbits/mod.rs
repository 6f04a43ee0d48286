//! Walker constellation propagation, ground grids, field-of-regard access,
//! inter-satellite line of sight and region access gaps.

mod access;
mod contacts;
mod elements;
mod grid;

pub use access::{
    central_angle_for_off_nadir, compute_access, gaps_from_passes, in_field_of_regard,
    off_nadir_deg, merge_region_passes, region_access_gaps, region_passes, AccessGap,
    AccessWindow, RegionPass,
};
pub use contacts::{
    compute_contacts, line_of_sight, Contact, ContactParams, ContactPlan, GroundStation, NodeId,
};
pub use elements::{
    build_walker, eci_to_ecef, ecef_to_eci, earth_rotation_angle, geodetic_to_ecef,
    orbital_period, propagate, propagate_eci, OrbitalElements, WalkerSpec, EARTH_RADIUS_KM,
    EARTH_ROTATION_RATE, MU_EARTH, SIDEREAL_DAY_S,
};
pub use grid::{assign_watersheds, GridPoint, RegionGrid, RegionSpec};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OrbitError {
    #[error("{n_sats} satellites cannot be split evenly into {n_planes} planes")]
    IndivisibleConstellation { n_sats: u32, n_planes: u32 },
    #[error("walker phasing {phasing} must be below the plane count {n_planes}")]
    BadPhasing { phasing: u32, n_planes: u32 },
    #[error("semi-major axis {0} km is not above the Earth surface")]
    BelowSurface(f64),
    #[error("inclination {0} deg outside [0, 180)")]
    BadInclination(f64),
    #[error("field of regard half-angle {0} deg outside (0, 90)")]
    BadFieldOfRegard(f64),
    #[error("timestep {step} s does not divide horizon [{start}, {end})")]
    BadTimestep { start: i64, end: i64, step: i64 },
    #[error("region extent {extent} km / resolution {resolution} km is not a usable grid")]
    BadGrid { extent: f64, resolution: f64 },
}
