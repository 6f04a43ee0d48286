use serde::{Deserialize, Serialize};

use super::{ObsSample, PredictorParams};
use crate::scenario::{FloodField, PrecipField};
use crate::types::{Time, WatershedId};

/// Flood magnitude after correcting `init` by the observed-to-estimated
/// precipitation ratio `r`.
pub fn corrected_magnitude(init: f64, r: f64, p: &PredictorParams) -> f64 {
    if r >= p.ratio_threshold {
        (init * (1.0 + p.coefficient * (r - 1.0))).max(0.0)
    } else {
        p.suppression_factor * init
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Correction {
    /// Pooled ratio over matched samples; applies to slots sampled after `after`.
    Ratio { r: f64, after: Time },
    /// Estimated precipitation summed to zero: estimate left unchanged.
    ZeroDenominator { after: Time },
}

/// Matched observed and estimated precipitation sums of one watershed.
#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RatioSums {
    pub observed: f64,
    pub estimated: f64,
    pub latest: Time,
    pub n: usize,
}

impl RatioSums {
    pub fn add(&mut self, observed: f64, estimated: f64, t: Time) {
        if self.n == 0 || t > self.latest {
            self.latest = t;
        }
        self.observed += observed;
        self.estimated += estimated;
        self.n += 1;
    }

    pub fn correction(&self) -> Option<Correction> {
        if self.n == 0 {
            None
        } else if self.estimated > 0.0 {
            Some(Correction::Ratio { r: self.observed / self.estimated, after: self.latest })
        } else {
            Some(Correction::ZeroDenominator { after: self.latest })
        }
    }
}

/// Corrections per watershed, applied lazily over the initial flood field.
#[derive(Clone, Debug, PartialEq)]
pub struct FloodEstimate {
    pub corrections: Vec<Option<Correction>>,
    pub params: PredictorParams,
}

impl FloodEstimate {
    pub fn unchanged(n_ws: usize, params: &PredictorParams) -> Self {
        FloodEstimate { corrections: vec![None; n_ws], params: params.clone() }
    }

    /// Pools every sample per watershed; each sample's estimate is read at its own slot.
    pub fn from_samples<'a>(
        init: &FloodField,
        precip_est: &PrecipField,
        samples: impl IntoIterator<Item = &'a ObsSample>,
        params: &PredictorParams,
    ) -> Self {
        let mut sums = vec![RatioSums::default(); init.n_ws];
        for s in samples {
            let w = init.watershed_of(s.gp);
            sums[w.index()].add(s.precip, precip_est.at_time(s.gp, s.t), s.t);
        }
        FloodEstimate { corrections: sums.iter().map(RatioSums::correction).collect(), params: params.clone() }
    }

    pub fn magnitude(&self, init: &FloodField, ws: WatershedId, slot: usize) -> f64 {
        let base = init.get_ws(ws, slot);
        match self.corrections[ws.index()] {
            Some(Correction::Ratio { r, after }) if slot as Time * init.slot_s > after => {
                corrected_magnitude(base, r, &self.params)
            }
            _ => base,
        }
    }

    pub fn flagged(&self) -> Vec<WatershedId> {
        self.corrections
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c, Some(Correction::ZeroDenominator { .. })))
            .map(|(w, _)| WatershedId(w as u32))
            .collect()
    }

    pub fn to_field(&self, init: &FloodField) -> FloodField {
        let mut out = init.clone();
        for w in 0..init.n_ws {
            for y in 0..init.n_slots {
                *out.get_ws_mut(WatershedId(w as u32), y) = self.magnitude(init, WatershedId(w as u32), y);
            }
        }
        out
    }
}

/// Outcome of correcting one watershed from its observations up to `t_obs`.
#[derive(Clone, Debug, PartialEq)]
pub struct FloodUpdate {
    pub flood_est: FloodField,
    pub ratio: Option<f64>,
    /// Set when the estimated precipitation sum is zero and nothing changed.
    pub flagged: bool,
}

/// Corrects watershed `ws` for slots sampled after `t_obs`, using the samples
/// of `precip_obs` that fall in `ws` at or before `t_obs`.
pub fn update_flood_estimate(
    flood_init: &FloodField,
    precip_obs: &[ObsSample],
    precip_est: &PrecipField,
    ws: WatershedId,
    t_obs: Time,
    params: &PredictorParams,
) -> FloodUpdate {
    let mut sums = RatioSums::default();
    for s in precip_obs.iter().filter(|s| s.t <= t_obs && flood_init.watershed_of(s.gp) == ws) {
        sums.add(s.precip, precip_est.at_time(s.gp, s.t), s.t);
    }
    let mut flood_est = flood_init.clone();
    if sums.n == 0 || sums.estimated <= 0.0 {
        return FloodUpdate { flood_est, ratio: None, flagged: sums.n > 0 };
    }
    let r = sums.observed / sums.estimated;
    for y in 0..flood_init.n_slots {
        if y as Time * flood_init.slot_s > t_obs {
            let v = flood_est.get_ws_mut(ws, y);
            *v = corrected_magnitude(*v, r, params);
        }
    }
    FloodUpdate { flood_est, ratio: Some(r), flagged: false }
}
