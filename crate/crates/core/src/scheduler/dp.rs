use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::Vector3;
use rpds::RedBlackTreeMap;

use super::{PlanResult, PlanningProblem, Reach, SchedulerParams};
use crate::attitude::slew_bounds;
use crate::predictor::{PathCounts, PathValue, ValueField};
use crate::types::{GpId, Obs, SatId, SchedulePath, Time};

const START: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct Entry {
    gp: GpId,
    t: Time,
    total: f64,
    len: u32,
    parent: u32,
    /// Bit `gp % 128` set for every grid point on the path.
    mask: u128,
    /// Visits per grid point along the path, shared with the parent's map.
    visits: RedBlackTreeMap<GpId, PathCounts>,
    dir: Vector3<f64>,
}

fn bit(gp: GpId) -> u128 {
    1u128 << (gp.0 % 128)
}

/// Sort key: total descending, then lowest gp, then earliest time.
#[derive(Copy, Clone, Debug)]
struct Key {
    total: f64,
    gp: GpId,
    t: Time,
    idx: u32,
}

impl Ord for Key {
    fn cmp(&self, o: &Self) -> Ordering {
        o.total.total_cmp(&self.total).then(self.gp.cmp(&o.gp)).then(self.t.cmp(&o.t)).then(self.idx.cmp(&o.idx))
    }
}
impl PartialOrd for Key {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl PartialEq for Key {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Key {}

#[derive(Copy, Clone, Debug)]
struct Cand {
    value: f64,
    pred: Option<Key>,
}

impl Cand {
    /// Higher value first; among equals the lowest predecessor gp, then the
    /// earliest predecessor time; starting fresh ranks last.
    fn better(&self, o: &Cand) -> bool {
        match self.value.total_cmp(&o.value) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => match (self.pred, o.pred) {
                (Some(a), Some(b)) => (a.gp, a.t, a.idx) < (b.gp, b.t, b.idx),
                (Some(_), None) => true,
                _ => false,
            },
        }
    }
}

/// Best `k` candidates, best first.
struct TopK {
    k: usize,
    items: Vec<Cand>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK { k, items: Vec::with_capacity(k + 1) }
    }

    fn threshold(&self) -> f64 {
        if self.items.len() < self.k {
            f64::NEG_INFINITY
        } else {
            self.items[self.k - 1].value
        }
    }

    fn offer(&mut self, c: Cand) {
        let pos = self.items.iter().position(|x| c.better(x)).unwrap_or(self.items.len());
        if pos < self.k {
            self.items.insert(pos, c);
            self.items.truncate(self.k);
        }
    }
}

/// Paths ending at one time step, best total first.
struct Bucket {
    t: Time,
    keys: Vec<Key>,
    /// Grid points every path here observed within the suppression window,
    /// with the last time that stays true.
    stale: BTreeMap<GpId, Time>,
}

/// All stored paths of one planning run; one (or k) per reached node.
#[derive(Clone, Debug)]
pub struct DpTable {
    sat: SatId,
    entries: Vec<Entry>,
    pub evaluations: u64,
    /// The run hit `max_evaluations` before the end of the horizon.
    pub truncated: bool,
}

impl DpTable {
    fn path_counts(&self, idx: u32, gp: GpId) -> PathCounts {
        let e = &self.entries[idx as usize];
        if e.mask & bit(gp) == 0 {
            return PathCounts::default();
        }
        e.visits.get(&gp).copied().unwrap_or_default()
    }

    fn path(&self, mut idx: u32) -> Vec<Obs> {
        let mut nodes = Vec::new();
        while idx != START {
            let e = &self.entries[idx as usize];
            nodes.push(Obs::new(e.gp, e.t));
            idx = e.parent;
        }
        nodes.reverse();
        nodes
    }

    /// Number of stored paths.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Best stored path ending strictly before `t`: the plan available if
    /// the run were stopped at `t`.
    pub fn best_until(&self, t: Time) -> PlanResult {
        let mut best: Option<usize> = None;
        for (i, e) in self.entries.iter().enumerate() {
            if e.t < t && best.is_none_or(|b| e.total > self.entries[b].total) {
                best = Some(i);
            }
        }
        match best {
            None => PlanResult { evaluations: self.evaluations, truncated: self.truncated, ..PlanResult::empty(self.sat) },
            Some(b) => {
                let e = &self.entries[b];
                PlanResult {
                    path: SchedulePath::with_nodes(self.sat, self.path(b as u32)),
                    value: PathValue::from_total(e.total, e.len as usize),
                    evaluations: self.evaluations,
                    fallback: false,
                    truncated: self.truncated,
                }
            }
        }
    }

    pub fn best(&self) -> PlanResult {
        self.best_until(Time::MAX)
    }
}

/// Maximum cumulative-value path for one satellite over the problem horizon.
pub fn schedule<P: PlanningProblem + ?Sized>(
    problem: &P,
    sat: SatId,
    anchor: Option<Obs>,
    field: &ValueField,
    params: &SchedulerParams,
) -> PlanResult {
    schedule_table(problem, sat, anchor, field, params).best()
}

pub fn schedule_table<P: PlanningProblem + ?Sized>(
    problem: &P,
    sat: SatId,
    anchor: Option<Obs>,
    field: &ValueField,
    params: &SchedulerParams,
) -> DpTable {
    run(problem, sat, anchor, field, params, true)
}

/// Same recursion with every earlier node scanned as a predecessor and no
/// window bookkeeping; reference for the windowed search.
pub fn schedule_unpruned<P: PlanningProblem + ?Sized>(
    problem: &P,
    sat: SatId,
    anchor: Option<Obs>,
    field: &ValueField,
    params: &SchedulerParams,
) -> PlanResult {
    run(problem, sat, anchor, field, params, false).best()
}

fn run<P: PlanningProblem + ?Sized>(
    problem: &P,
    sat: SatId,
    anchor: Option<Obs>,
    field: &ValueField,
    params: &SchedulerParams,
    pruned: bool,
) -> DpTable {
    let (h0, h1) = problem.horizon();
    let step = problem.step().max(1);
    let model = problem.slew_model();
    let (min_slew, max_slew) = slew_bounds(model, problem.for_half_angle_deg());
    let reach = Reach::new(model);
    let anchor_dir = anchor.map(|a| problem.pointing(sat, a.gp, a.t));
    let k = params.paths_per_node.max(1);
    // older entries are almost always reachable; they live in one value-sorted pool
    let pool_lag = max_slew.ceil() as Time + 2 * step;

    let mut table = DpTable { sat, entries: Vec::new(), evaluations: 0, truncated: false };
    let mut pool: BTreeSet<Key> = BTreeSet::new();
    let mut window: VecDeque<Bucket> = VecDeque::new();
    let mut all: Vec<Key> = Vec::new();
    let mut gps = Vec::new();
    let budget = params.max_evaluations.unwrap_or(u64::MAX);
    let mut t = h0;
    'steps: while t < h1 {
        if pruned {
            while window.front().is_some_and(|b| t - b.t > pool_lag) {
                pool.extend(window.pop_front().unwrap().keys);
            }
        }
        problem.in_for(sat, t, &mut gps);
        let mut bucket = Vec::new();
        for &g in &gps {
            let ub = field.value_new(g, t);
            if ub <= 0.0 {
                continue;
            }
            let dir = problem.pointing(sat, g, t);
            let mut top = TopK::new(k);
            let start_ok = match (anchor, &anchor_dir) {
                (Some(a), Some(ad)) => reach.feasible(ad, &dir, t - a.t),
                _ => true,
            };
            if start_ok {
                top.offer(Cand { value: ub, pred: None });
            }
            let (mut evals, mut skipped) = (0u64, 0u64);
            // Some(last) when the key's path saw `g` too recently to gain anything
            let mut consider = |key: &Key, top: &mut TopK| -> Option<Time> {
                evals += 1;
                let counts = table.path_counts(key.idx, g);
                if let Some(last) = counts.last.filter(|&l| t <= l + field.suppress_s) {
                    return Some(last);
                }
                let e = &table.entries[key.idx as usize];
                if reach.feasible(&e.dir, &dir, t - e.t) {
                    let m = field.marginal(g, t, counts);
                    if m > 0.0 {
                        top.offer(Cand { value: e.total + m, pred: Some(*key) });
                    }
                }
                None
            };
            if pruned {
                for key in pool.iter().take(params.settled_scan_limit) {
                    if key.total + ub < top.threshold() {
                        break;
                    }
                    consider(key, &mut top);
                }
                for b in window.iter_mut() {
                    if ((t - b.t) as f64) < min_slew {
                        continue;
                    }
                    if b.stale.get(&g).is_some_and(|&until| t <= until) {
                        skipped += 1;
                        continue;
                    }
                    let mut stale_until = Some(Time::MAX);
                    for key in &b.keys {
                        if key.total + ub < top.threshold() {
                            stale_until = None;
                            break;
                        }
                        let last = consider(key, &mut top);
                        stale_until = stale_until.zip(last).map(|(u, l)| u.min(l + field.suppress_s));
                    }
                    if let Some(u) = stale_until.filter(|_| !b.keys.is_empty()) {
                        b.stale.insert(g, u);
                    }
                }
            } else {
                for key in &all {
                    consider(key, &mut top);
                }
            }
            table.evaluations += evals + skipped + 1;
            for c in top.items {
                let (parent, len, mask, visits) = match c.pred {
                    Some(p) => {
                        let e = &table.entries[p.idx as usize];
                        (p.idx, e.len + 1, e.mask | bit(g), e.visits.clone())
                    }
                    None => (START, 1, bit(g), RedBlackTreeMap::new()),
                };
                let prev = visits.get(&g).map_or(0, |c| c.count);
                let visits = visits.insert(g, PathCounts { count: prev + 1, last: Some(t) });
                let idx = table.entries.len() as u32;
                table.entries.push(Entry { gp: g, t, total: c.value, len, parent, mask, visits, dir });
                bucket.push(Key { total: c.value, gp: g, t, idx });
            }
            if table.evaluations > budget {
                table.truncated = true;
                break 'steps;
            }
        }
        if pruned {
            bucket.sort();
            window.push_back(Bucket { t, keys: bucket, stale: BTreeMap::new() });
        } else {
            all.extend(bucket);
        }
        t += step;
    }
    table
}
