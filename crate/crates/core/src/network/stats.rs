use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DeliveryRecord, DeliveryStatus, NetworkError};
use crate::orbits::AccessGap;
use crate::types::{RegionId, SatId, Time};

/// Median of a non-empty sample; even lengths average the middle pair.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorityStats {
    pub priority: u32,
    pub bundles: usize,
    pub delivered: usize,
    pub median_latency_s: Option<f64>,
    pub max_latency_s: Option<Time>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionGapStats {
    pub region: RegionId,
    pub median_gap_s: f64,
    pub min_gap_s: Time,
}

/// Whether every bundle from `from` to `to` about `region` arrived before
/// `to` could next reach the region after `from` left it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsensusFlag {
    pub region: RegionId,
    pub from: SatId,
    pub to: SatId,
    pub bundles: usize,
    pub max_latency_s: Option<Time>,
    pub min_gap_s: Time,
    pub reached: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub bundles: usize,
    pub delivered: usize,
    pub dropped: usize,
    pub in_flight: usize,
    pub median_latency_s: Option<f64>,
    pub max_latency_s: Option<Time>,
    pub median_gap_s: Option<f64>,
    pub per_priority: Vec<PriorityStats>,
    pub per_region: Vec<RegionGapStats>,
    pub consensus: Vec<ConsensusFlag>,
}

impl LatencySummary {
    /// Median delivery latency is below the median revisit gap.
    pub fn latency_below_gap(&self) -> Option<bool> {
        Some(self.median_latency_s? < self.median_gap_s?)
    }
}

pub fn latency_stats(records: &[DeliveryRecord], gaps: &[AccessGap]) -> Result<LatencySummary, NetworkError> {
    if records.is_empty() {
        return Err(NetworkError::EmptyRecords);
    }
    let lat: Vec<f64> = records.iter().filter_map(|r| r.latency()).map(|l| l as f64).collect();
    let count = |f: fn(&DeliveryStatus) -> bool| records.iter().filter(|r| f(&r.status)).count();

    let mut by_prio: BTreeMap<u32, Vec<&DeliveryRecord>> = BTreeMap::new();
    for r in records {
        by_prio.entry(r.priority).or_default().push(r);
    }
    let per_priority = by_prio
        .into_iter()
        .map(|(priority, rs)| {
            let l: Vec<Time> = rs.iter().filter_map(|r| r.latency()).collect();
            PriorityStats {
                priority,
                bundles: rs.len(),
                delivered: l.len(),
                median_latency_s: median(&l.iter().map(|&x| x as f64).collect::<Vec<_>>()),
                max_latency_s: l.iter().copied().max(),
            }
        })
        .collect();

    let mut by_region: BTreeMap<RegionId, Vec<Time>> = BTreeMap::new();
    let mut by_pair: BTreeMap<(RegionId, SatId, SatId), Time> = BTreeMap::new();
    for g in gaps {
        by_region.entry(g.region).or_default().push(g.gap);
        let e = by_pair.entry((g.region, g.from, g.to)).or_insert(Time::MAX);
        *e = (*e).min(g.gap);
    }
    let per_region = by_region
        .iter()
        .map(|(&region, g)| RegionGapStats {
            region,
            median_gap_s: median(&g.iter().map(|&x| x as f64).collect::<Vec<_>>()).unwrap_or(f64::NAN),
            min_gap_s: g.iter().copied().min().unwrap_or(0),
        })
        .collect();
    let all_gaps: Vec<f64> = gaps.iter().map(|g| g.gap as f64).collect();

    let mut consensus = Vec::new();
    for (&(region, from, to), &min_gap) in &by_pair {
        let rs: Vec<&DeliveryRecord> =
            records.iter().filter(|r| r.region == region && r.src == from && r.dst == to).collect();
        if rs.is_empty() {
            continue;
        }
        let max_latency = rs.iter().filter_map(|r| r.latency()).max();
        let all_delivered = rs.iter().all(|r| r.latency().is_some());
        consensus.push(ConsensusFlag {
            region,
            from,
            to,
            bundles: rs.len(),
            max_latency_s: max_latency,
            min_gap_s: min_gap,
            reached: all_delivered && max_latency.is_some_and(|l| l < min_gap),
        });
    }

    Ok(LatencySummary {
        bundles: records.len(),
        delivered: lat.len(),
        dropped: count(|s| matches!(s, DeliveryStatus::Dropped { .. })),
        in_flight: count(|s| matches!(s, DeliveryStatus::InFlight)),
        median_latency_s: median(&lat),
        max_latency_s: records.iter().filter_map(|r| r.latency()).max(),
        median_gap_s: median(&all_gaps),
        per_priority,
        per_region,
        consensus,
    })
}
