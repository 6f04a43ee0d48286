//! Agile constellation flood-monitoring simulator.

pub mod attitude;
pub mod evaluation;
pub mod executive;
pub mod harness;
pub mod orbits;
pub mod network;
pub mod predictor;
pub mod rng;
pub mod scenario;
pub mod scheduler;
pub mod types;

pub use attitude::{slew_bounds, slew_time, PointingGeometry, SlewModel};
pub use types::{GpId, Obs, RegionId, SatId, SchedulePath, Time, WatershedId};
