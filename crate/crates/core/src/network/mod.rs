//! Delay-tolerant network: bundle creation, priority and TTL assignment,
//! epidemic store-and-forward over the contact plan, delivery statistics.

mod bundle;
mod sim;
mod stats;

pub use bundle::{
    assign_priority, chunk_payload, next_access, ttl_for, Bundle, BundleId, BundlePayload, PayloadLayout, NO_ACCESS_PRIORITY,
};
pub use sim::{DeliveryRecord, DeliveryStatus, NetworkState};
pub use stats::{latency_stats, median, ConsensusFlag, LatencySummary, PriorityStats, RegionGapStats};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::Time;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("no delivery records")]
    EmptyRecords,
    #[error("time step must be positive, got {0}")]
    BadStep(Time),
    #[error("rate table must be non-empty with increasing ranges and positive rates")]
    BadRateTable,
}

/// Link rate as a step function of range: the first entry whose range bound
/// covers the current range applies; beyond the last bound there is no link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct RateTable {
    steps: Vec<(f64, f64)>,
}

impl Default for RateTable {
    fn default() -> Self {
        RateTable { steps: vec![(10_000.0, 1000.0)] }
    }
}

impl TryFrom<Vec<(f64, f64)>> for RateTable {
    type Error = NetworkError;
    fn try_from(steps: Vec<(f64, f64)>) -> Result<Self, NetworkError> {
        RateTable::new(steps)
    }
}

impl From<RateTable> for Vec<(f64, f64)> {
    fn from(r: RateTable) -> Self {
        r.steps
    }
}

impl RateTable {
    pub fn new(steps: Vec<(f64, f64)>) -> Result<Self, NetworkError> {
        let ok = !steps.is_empty()
            && steps.iter().all(|&(r, b)| r > 0.0 && b > 0.0)
            && steps.windows(2).all(|w| w[0].0 < w[1].0);
        if ok {
            Ok(RateTable { steps })
        } else {
            Err(NetworkError::BadRateTable)
        }
    }

    /// Bits per second at `range_km`; zero when out of range.
    pub fn rate(&self, range_km: f64) -> f64 {
        self.steps.iter().find(|&&(r, _)| range_km <= r).map_or(0.0, |&(_, b)| b)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        RateTable { steps: self.steps.iter().map(|&(r, b)| (r, b * factor)).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkParams {
    pub bundle_size_bits: u64,
    pub rate_table: RateTable,
    /// Lower bound on a bundle's lifetime.
    pub ttl_min_s: Time,
    /// Upper bound on a bundle's lifetime; one orbital period when unset.
    pub ttl_max_s: Option<Time>,
    /// Overrides the access-based lifetime for every bundle.
    pub ttl_override_s: Option<Time>,
    pub layout: PayloadLayout,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            bundle_size_bits: 2000,
            rate_table: RateTable::default(),
            ttl_min_s: 60,
            ttl_max_s: None,
            ttl_override_s: None,
            layout: PayloadLayout::default(),
        }
    }
}
