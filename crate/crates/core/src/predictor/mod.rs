//! Flood-estimate correction from observed precipitation, observation value
//! decay and suppression, and path scoring.

mod knowledge;
mod pipeline;
mod update;
mod value;

pub use knowledge::{Knowledge, ObsSample, PeerPlan};
pub use pipeline::{plan_value_field, value_update, PlanInputs};
pub use update::{corrected_magnitude, update_flood_estimate, Correction, FloodEstimate, FloodUpdate, RatioSums};
pub use value::{decay_value, node_values, path_value, PathCounts, PathValue, ValueField};

use serde::{Deserialize, Serialize};

use crate::types::Time;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictorParams {
    /// Slope of the correction for ratios at or above the threshold.
    pub coefficient: f64,
    pub ratio_threshold: f64,
    /// Multiplier applied below the threshold.
    pub suppression_factor: f64,
    /// Value is zero for this long after an observation of the same grid point.
    pub suppression_window_s: Time,
    /// Observations up to this long before the planning horizon still decay value.
    pub decay_lookback_s: Time,
}

impl Default for PredictorParams {
    fn default() -> Self {
        PredictorParams {
            coefficient: 1.85,
            ratio_threshold: 0.5,
            suppression_factor: 0.05,
            suppression_window_s: 900,
            decay_lookback_s: 0,
        }
    }
}
