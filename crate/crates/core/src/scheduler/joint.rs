use std::cmp::Ordering;
use std::collections::BTreeSet;

use nalgebra::Vector3;
use rpds::RedBlackTreeMap;

use super::{attributed_values, schedule, PlanResult, PlanningProblem, Reach, SchedulerError, SchedulerParams};
use crate::predictor::{PathCounts, PathValue, ValueField};
use crate::types::{GpId, Obs, SatId, SchedulePath, Time};

const START: u32 = u32::MAX;

/// Satellites whose fields of regard contain a common grid point at the same
/// time somewhere in the horizon, grouped transitively. Groups and members
/// are in ascending satellite order.
pub fn overlap_groups<P: PlanningProblem + ?Sized>(problem: &P, sats: &[SatId]) -> Vec<Vec<SatId>> {
    let n = sats.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let (h0, h1) = problem.horizon();
    let mut lists: Vec<Vec<GpId>> = vec![Vec::new(); n];
    let mut t = h0;
    while t < h1 {
        for (i, &s) in sats.iter().enumerate() {
            problem.in_for(s, t, &mut lists[i]);
        }
        for a in 0..n {
            for b in a + 1..n {
                if find(&mut parent, a) != find(&mut parent, b) && intersects(&lists[a], &lists[b]) {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        t += problem.step().max(1);
    }
    let mut groups: Vec<Vec<SatId>> = Vec::new();
    let mut root_of: Vec<Option<usize>> = vec![None; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| sats[i]);
    for i in order {
        let r = find(&mut parent, i);
        match root_of[r] {
            Some(g) => groups[g].push(sats[i]),
            None => {
                root_of[r] = Some(groups.len());
                groups.push(vec![sats[i]]);
            }
        }
    }
    groups
}

fn intersects(a: &[GpId], b: &[GpId]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => return true,
        }
    }
    false
}

type Last = Option<(Obs, Vector3<f64>)>;

struct JointEntry {
    t: Time,
    choice: Vec<Option<GpId>>,
    last: Vec<Last>,
    total: f64,
    len: u32,
    parent: u32,
    mask: u128,
    /// Visits per grid point along the joint path, shared with the parent's map.
    visits: RedBlackTreeMap<GpId, PathCounts>,
}

#[derive(Copy, Clone, PartialEq)]
struct JKey {
    total: f64,
    idx: u32,
}
impl Eq for JKey {}
impl Ord for JKey {
    fn cmp(&self, o: &Self) -> Ordering {
        o.total.total_cmp(&self.total).then(self.idx.cmp(&o.idx))
    }
}
impl PartialOrd for JKey {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

fn bit(gp: GpId) -> u128 {
    1u128 << (gp.0 % 128)
}

fn union_counts(entries: &[JointEntry], idx: u32, gp: GpId) -> PathCounts {
    if idx == START || entries[idx as usize].mask & bit(gp) == 0 {
        return PathCounts::default();
    }
    entries[idx as usize].visits.get(&gp).copied().unwrap_or_default()
}

/// Joint dynamic program over a group of satellites with overlapping fields
/// of regard. Every step enumerates each satellite's last-leg choice (a grid
/// point or idle); a grid point's value is credited once across the group
/// and no two satellites may take the same grid point at the same time.
/// Fails when the number of joint choices at any step exceeds the cap.
pub fn overlapping_coordination<P: PlanningProblem + ?Sized>(
    problem: &P,
    group: &[SatId],
    anchors: &[Option<Obs>],
    field: &ValueField,
    params: &SchedulerParams,
) -> Result<Vec<PlanResult>, SchedulerError> {
    let n = group.len();
    let (h0, h1) = problem.horizon();
    let step = problem.step().max(1);
    let reach = Reach::new(problem.slew_model());
    let anchor_last: Vec<Last> = (0..n)
        .map(|i| anchors.get(i).copied().flatten().map(|o| (o, problem.pointing(group[i], o.gp, o.t))))
        .collect();
    let mut entries: Vec<JointEntry> = Vec::new();
    let mut sorted: BTreeSet<JKey> = BTreeSet::new();
    let mut evaluations = 0u64;
    let mut lists: Vec<Vec<GpId>> = vec![Vec::new(); n];
    let mut t = h0;
    while t < h1 {
        let mut options: Vec<Vec<(GpId, Vector3<f64>, f64)>> = Vec::with_capacity(n);
        for (i, &s) in group.iter().enumerate() {
            problem.in_for(s, t, &mut lists[i]);
            options.push(
                lists[i]
                    .iter()
                    .map(|&g| (g, problem.pointing(s, g, t), field.value_new(g, t)))
                    .filter(|o| o.2 > 0.0)
                    .collect(),
            );
        }
        let count = options.iter().map(|o| o.len() + 1).product::<usize>() - 1;
        if count > params.permutation_cap {
            return Err(SchedulerError::PermutationCap { t, count, cap: params.permutation_cap });
        }
        let mut new_keys = Vec::new();
        let mut pick = vec![0usize; n];
        // odometer over (idle, option 0, option 1, ...) per satellite
        loop {
            let mut i = 0;
            while i < n {
                pick[i] += 1;
                if pick[i] <= options[i].len() {
                    break;
                }
                pick[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
            let choice: Vec<Option<usize>> = pick.iter().map(|&p| p.checked_sub(1)).collect();
            let gps: Vec<Option<GpId>> = (0..n).map(|i| choice[i].map(|c| options[i][c].0)).collect();
            let mut seen = BTreeSet::new();
            if gps.iter().flatten().any(|g| !seen.insert(*g)) {
                continue;
            }
            let ub: f64 = (0..n).filter_map(|i| choice[i].map(|c| options[i][c].2)).sum();
            let try_from = |pred: u32, evals: &mut u64| -> Option<f64> {
                *evals += 1;
                let lasts = if pred == START { &anchor_last } else { &entries[pred as usize].last };
                let mut gain = 0.0;
                for i in 0..n {
                    let Some(c) = choice[i] else { continue };
                    let (g, dir, _) = &options[i][c];
                    if let Some((o, d)) = &lasts[i] {
                        if !reach.feasible(d, dir, t - o.t) {
                            return None;
                        }
                    }
                    gain += field.marginal(*g, t, union_counts(&entries, pred, *g));
                }
                let base = if pred == START { 0.0 } else { entries[pred as usize].total };
                (gain > 0.0).then_some(base + gain)
            };
            let mut best: Option<(f64, u32)> = try_from(START, &mut evaluations).map(|v| (v, START));
            for key in &sorted {
                if best.is_some_and(|(b, _)| key.total + ub < b) {
                    break;
                }
                if let Some(v) = try_from(key.idx, &mut evaluations) {
                    // equal values keep the earliest stored predecessor; a fresh start ranks last
                    let better = match best {
                        None => true,
                        Some((b, p)) => v > b || (v == b && (p == START || key.idx < p)),
                    };
                    if better {
                        best = Some((v, key.idx));
                    }
                }
            }
            if let Some((total, pred)) = best {
                let (mut last, len, mut mask, mut visits) = if pred == START {
                    (anchor_last.clone(), 0, 0u128, RedBlackTreeMap::new())
                } else {
                    let e = &entries[pred as usize];
                    (e.last.clone(), e.len, e.mask, e.visits.clone())
                };
                let mut added = 0;
                for i in 0..n {
                    if let Some(c) = choice[i] {
                        let (g, dir, _) = options[i][c];
                        last[i] = Some((Obs::new(g, t), dir));
                        mask |= bit(g);
                        let prev = visits.get(&g).map_or(0, |c| c.count);
                        visits.insert_mut(g, PathCounts { count: prev + 1, last: Some(t) });
                        added += 1;
                    }
                }
                let idx = entries.len() as u32;
                entries.push(JointEntry { t, choice: gps, last, total, len: len + added, parent: pred, mask, visits });
                new_keys.push(JKey { total, idx });
            }
        }
        sorted.extend(new_keys);
        t += step;
    }
    let best = sorted.iter().next().map(|k| k.idx);
    let mut paths: Vec<Vec<Obs>> = vec![Vec::new(); n];
    let mut idx = best.unwrap_or(START);
    while idx != START {
        let e = &entries[idx as usize];
        for i in 0..n {
            if let Some(g) = e.choice[i] {
                paths[i].push(Obs::new(g, e.t));
            }
        }
        idx = e.parent;
    }
    let paths: Vec<SchedulePath> = group
        .iter()
        .zip(paths)
        .map(|(&s, mut nodes)| {
            nodes.reverse();
            SchedulePath::with_nodes(s, nodes)
        })
        .collect();
    let shares = attributed_values(&paths, field);
    let share = evaluations / n.max(1) as u64;
    Ok(paths
        .into_iter()
        .zip(shares)
        .map(|(path, v)| {
            let len = path.len();
            PlanResult { path, value: PathValue::from_total(v, len), evaluations: share, fallback: false, truncated: false }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoordinationOutcome {
    pub plans: Vec<PlanResult>,
    pub groups: Vec<Vec<SatId>>,
    /// Groups that exceeded the permutation cap.
    pub fallbacks: usize,
}

/// Plans every satellite. Overlapping groups are coordinated jointly; groups
/// are planned in order, each seeing the plans of the groups before it.
/// Plans come back in the order of `sats`.
pub fn schedule_constellation<P: PlanningProblem + ?Sized>(
    problem: &P,
    sats: &[SatId],
    anchors: &[Option<Obs>],
    field: &ValueField,
    params: &SchedulerParams,
) -> CoordinationOutcome {
    let groups = if params.coordinate_overlaps {
        overlap_groups(problem, sats)
    } else {
        let mut v: Vec<Vec<SatId>> = sats.iter().map(|&s| vec![s]).collect();
        v.sort();
        v
    };
    let anchor_of = |s: SatId| sats.iter().position(|&x| x == s).and_then(|i| anchors.get(i).copied().flatten());
    let mut known = field.clone();
    let mut by_sat: Vec<Option<PlanResult>> = vec![None; sats.len()];
    let mut fallbacks = 0;
    for group in &groups {
        let group_anchors: Vec<Option<Obs>> = group.iter().map(|&s| anchor_of(s)).collect();
        let results = if group.len() == 1 {
            vec![schedule(problem, group[0], group_anchors[0], &known, params)]
        } else {
            match overlapping_coordination(problem, group, &group_anchors, &known, params) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("overlapping satellites {group:?}: {e}; scheduling them one after another");
                    fallbacks += 1;
                    let mut local = known.clone();
                    let mut out = Vec::new();
                    for (i, &s) in group.iter().enumerate() {
                        let mut r = schedule(problem, s, group_anchors[i], &local, params);
                        r.fallback = true;
                        local.suppress_recent(r.path.nodes.iter().copied());
                        out.push(r);
                    }
                    out
                }
            }
        };
        for r in results {
            known.suppress_recent(r.path.nodes.iter().copied());
            let i = sats.iter().position(|&x| x == r.path.sat).unwrap();
            by_sat[i] = Some(r);
        }
    }
    CoordinationOutcome { plans: by_sat.into_iter().map(Option::unwrap).collect(), groups, fallbacks }
}

#[cfg(test)]
mod tests {
    use super::super::{check_path, exhaustive_oracle, union_value, SyntheticProblem, SyntheticSat};
    use super::*;
    use crate::attitude::SlewModel;

    fn two_sats_one_target() -> SyntheticProblem {
        let mut p = SyntheticProblem::line(vec![0.0], 6, SlewModel::default());
        p.sats.push(SyntheticSat { x0_km: -20.0, y_km: 10.0, speed_km_s: 7.0 });
        p
    }

    #[test]
    fn one_shared_target_claimed_once() {
        let p = two_sats_one_target();
        let f = p.uniform_values(&[200]);
        let plans = overlapping_coordination(&p, &p.sat_ids(), &[None, None], &f, &SchedulerParams::default()).unwrap();
        let claimed: usize = plans.iter().map(|r| r.path.len()).sum();
        assert_eq!(claimed, 1);
        let paths: Vec<_> = plans.iter().map(|r| r.path.clone()).collect();
        assert_eq!(union_value(&paths, &f).total, 200.0);
    }

    #[test]
    fn disjoint_targets_split() {
        // each satellite sees its own target plus a shared low-value point between them
        let mut p = SyntheticProblem::line(vec![-200.0, 200.0, 0.0], 4, SlewModel::default());
        p.sats = vec![
            SyntheticSat { x0_km: -200.0, y_km: 0.0, speed_km_s: 0.0 },
            SyntheticSat { x0_km: 200.0, y_km: 0.0, speed_km_s: 0.0 },
        ];
        p.for_half_angle_deg = 35.0;
        let f = p.uniform_values(&[150, 140, 5]);
        assert_eq!(overlap_groups(&p, &p.sat_ids()).len(), 1);
        let plans = overlapping_coordination(&p, &p.sat_ids(), &[None, None], &f, &SchedulerParams::default()).unwrap();
        assert_eq!(plans[0].path.nodes[0].gp, GpId(0));
        assert_eq!(plans[1].path.nodes[0].gp, GpId(1));
    }

    #[test]
    fn empty_overlap_is_independent_dp() {
        for seed in 0..5 {
            let (p, f) = SyntheticProblem::random(seed, 2, 4, 15, false);
            let out = schedule_constellation(&p, &p.sat_ids(), &[None, None], &f, &SchedulerParams::default());
            assert_eq!(out.groups.len(), 2);
            for (i, s) in p.sat_ids().into_iter().enumerate() {
                let solo = schedule(&p, s, None, &f, &SchedulerParams::default());
                assert_eq!(out.plans[i].path, solo.path);
            }
        }
    }

    #[test]
    fn joint_close_to_oracle_and_never_double_claims() {
        for seed in 0..10 {
            let (p, f) = SyntheticProblem::random(seed, 2, 4, 15, true);
            let plans = overlapping_coordination(&p, &p.sat_ids(), &[None, None], &f, &SchedulerParams::default()).unwrap();
            let paths: Vec<_> = plans.iter().map(|r| r.path.clone()).collect();
            for path in &paths {
                check_path(&p, path, None).unwrap();
            }
            let a: BTreeSet<Obs> = paths[0].nodes.iter().copied().collect();
            assert!(paths[1].nodes.iter().all(|o| !a.contains(o)));
            let v = union_value(&paths, &f).total;
            assert!((v - plans.iter().map(|r| r.value.total).sum::<f64>()).abs() < 1e-9);
            let o = exhaustive_oracle(&p, &p.sat_ids(), &[None, None], &f).unwrap();
            assert!(v <= o.value.total + 1e-9);
            assert!(v >= 0.75 * o.value.total, "seed {seed}: {v} vs {}", o.value.total);
        }
    }

    #[test]
    fn cap_triggers_sequential_fallback() {
        let (p, f) = SyntheticProblem::random(2, 2, 5, 15, true);
        let params = SchedulerParams { permutation_cap: 3, ..Default::default() };
        assert!(matches!(
            overlapping_coordination(&p, &p.sat_ids(), &[None, None], &f, &params),
            Err(SchedulerError::PermutationCap { .. })
        ));
        let out = schedule_constellation(&p, &p.sat_ids(), &[None, None], &f, &params);
        assert_eq!(out.fallbacks, 1);
        assert!(out.plans.iter().all(|r| r.fallback));
        let a: BTreeSet<Obs> = out.plans[0].path.nodes.iter().copied().collect();
        assert!(out.plans[1].path.nodes.iter().all(|o| !a.contains(o)));
    }
}
