use serde::{Deserialize, Serialize};

use crate::orbits::RegionPass;
use crate::predictor::ObsSample;
use crate::types::{RegionId, SatId, Time, WatershedId};

pub type BundleId = u64;

/// Priority of destinations that never reach the region.
pub const NO_ACCESS_PRIORITY: u32 = u32::MAX;

/// Fixed field sizes used to account payload bytes against the bundle budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PayloadLayout {
    /// region id, source, creation time.
    pub header_bytes: usize,
    /// gp id, time, precipitation sample.
    pub sample_bytes: usize,
    /// watershed id, cumulative ratio.
    pub ratio_bytes: usize,
}

impl Default for PayloadLayout {
    fn default() -> Self {
        PayloadLayout { header_bytes: 10, sample_bytes: 10, ratio_bytes: 6 }
    }
}

/// Observed schedule fragment plus model-parameter summary for one region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundlePayload {
    pub region: RegionId,
    pub samples: Vec<ObsSample>,
    pub ratios: Vec<(WatershedId, f64)>,
}

impl BundlePayload {
    pub fn bytes(&self, layout: &PayloadLayout) -> usize {
        layout.header_bytes + self.samples.len() * layout.sample_bytes + self.ratios.len() * layout.ratio_bytes
    }
}

/// Splits a payload so each piece fits `budget_bytes`. The ratio summary
/// rides with every piece.
pub fn chunk_payload(payload: BundlePayload, layout: &PayloadLayout, budget_bytes: usize) -> Vec<BundlePayload> {
    let fixed = layout.header_bytes + payload.ratios.len() * layout.ratio_bytes;
    let per = (budget_bytes.saturating_sub(fixed) / layout.sample_bytes.max(1)).max(1);
    if payload.samples.len() <= per {
        return vec![payload];
    }
    payload
        .samples
        .chunks(per)
        .map(|c| BundlePayload { region: payload.region, samples: c.to_vec(), ratios: payload.ratios.clone() })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub id: BundleId,
    pub src: SatId,
    pub dst: SatId,
    pub created_at: Time,
    pub ttl: Time,
    pub size_bits: u64,
    pub priority: u32,
    pub payload: BundlePayload,
}

impl Bundle {
    pub fn expires_at(&self) -> Time {
        self.created_at + self.ttl
    }
}

/// Start of the first region pass of `sat` still open at or after `t`
/// (returns `t` while a pass is in progress).
pub fn next_access(passes: &[RegionPass], sat: SatId, region: RegionId, t: Time) -> Option<Time> {
    passes
        .iter()
        .filter(|p| p.sat == sat && p.region == region && p.end > t)
        .map(|p| p.start.max(t))
        .min()
}

/// Rank of `dst` among the other satellites by time to next access of the
/// bundle's region; satellites tied on time share a rank. Rank 0 is soonest.
pub fn assign_priority(passes: &[RegionPass], sats: &[SatId], src: SatId, dst: SatId, region: RegionId, t: Time) -> u32 {
    let Some(mine) = next_access(passes, dst, region, t) else { return NO_ACCESS_PRIORITY };
    sats.iter()
        .filter(|&&s| s != src && s != dst)
        .filter(|&&s| next_access(passes, s, region, t).is_some_and(|n| n < mine))
        .count() as u32
}

/// Lifetime covering the wait until `dst` next reaches the region, within bounds.
pub fn ttl_for(passes: &[RegionPass], dst: SatId, region: RegionId, t: Time, min_s: Time, max_s: Time) -> Time {
    match next_access(passes, dst, region, t) {
        Some(n) => (n - t).clamp(min_s, max_s),
        None => max_s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::GpId;

    fn pass(sat: u32, start: Time, end: Time) -> RegionPass {
        RegionPass { sat: SatId(sat), region: RegionId(0), start, end }
    }

    #[test]
    fn priority_by_next_access() {
        let passes = vec![pass(1, 300, 400), pass(2, 900, 1000), pass(3, 1800, 1900)];
        let sats: Vec<SatId> = (0..5).map(SatId).collect();
        assert_eq!(assign_priority(&passes, &sats, SatId(0), SatId(1), RegionId(0), 0), 0);
        assert_eq!(assign_priority(&passes, &sats, SatId(0), SatId(2), RegionId(0), 0), 1);
        assert_eq!(assign_priority(&passes, &sats, SatId(0), SatId(3), RegionId(0), 0), 2);
        assert_eq!(assign_priority(&passes, &sats, SatId(0), SatId(4), RegionId(0), 0), NO_ACCESS_PRIORITY);
        // in-progress pass counts as immediate
        assert_eq!(next_access(&passes, SatId(1), RegionId(0), 350), Some(350));
        assert_eq!(next_access(&passes, SatId(1), RegionId(0), 400), None);
    }

    #[test]
    fn ttl_clamped() {
        let passes = vec![pass(1, 300, 400)];
        assert_eq!(ttl_for(&passes, SatId(1), RegionId(0), 0, 60, 5000), 300);
        assert_eq!(ttl_for(&passes, SatId(1), RegionId(0), 290, 60, 5000), 60);
        assert_eq!(ttl_for(&passes, SatId(2), RegionId(0), 0, 60, 5000), 5000);
    }

    #[test]
    fn chunking_respects_budget() {
        let layout = PayloadLayout::default();
        let samples: Vec<ObsSample> =
            (0..50).map(|i| ObsSample { sat: SatId(0), gp: GpId(i), t: i as Time, precip: 1.0 }).collect();
        let p = BundlePayload { region: RegionId(0), samples, ratios: vec![(WatershedId(0), 1.0); 4] };
        let parts = chunk_payload(p, &layout, 250);
        assert!(parts.iter().all(|c| c.bytes(&layout) <= 250));
        assert_eq!(parts.iter().map(|c| c.samples.len()).sum::<usize>(), 50);
        assert_eq!(parts.len(), 3);
    }
}
