//! Identifiers and small value types shared by every module.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Simulation time in whole seconds from mission start.
pub type Time = i64;

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident, $prefix:literal) => {
        $(#[$m])*
        #[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(
    /// Satellite index within the constellation.
    SatId,
    "sat"
);
id_type!(
    /// Global grid point index, unique across all regions of a scenario.
    GpId,
    "gp"
);
id_type!(RegionId, "region");
id_type!(
    /// Watershed (contributing area) index, unique across regions.
    WatershedId,
    "ws"
);

/// One scheduled or executed observation: grid point `gp` captured at `t`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Obs {
    pub gp: GpId,
    pub t: Time,
}

impl Obs {
    pub fn new(gp: GpId, t: Time) -> Self {
        Obs { gp, t }
    }
}

/// Time-ordered observation plan of one satellite.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulePath {
    pub sat: SatId,
    pub nodes: Vec<Obs>,
}

impl SchedulePath {
    pub fn new(sat: SatId) -> Self {
        SchedulePath { sat, nodes: Vec::new() }
    }

    pub fn with_nodes(sat: SatId, nodes: Vec<Obs>) -> Self {
        SchedulePath { sat, nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn last(&self) -> Option<Obs> {
        self.nodes.last().copied()
    }

    pub fn is_time_ordered(&self) -> bool {
        self.nodes.windows(2).all(|w| w[0].t < w[1].t)
    }

    /// Nodes strictly before `t`.
    pub fn before(&self, t: Time) -> &[Obs] {
        let i = self.nodes.partition_point(|o| o.t < t);
        &self.nodes[..i]
    }

    /// Nodes at or after `t`.
    pub fn from(&self, t: Time) -> &[Obs] {
        let i = self.nodes.partition_point(|o| o.t < t);
        &self.nodes[i..]
    }
}
