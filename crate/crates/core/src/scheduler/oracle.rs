use std::collections::BTreeSet;

use nalgebra::Vector3;

use super::{PlanningProblem, Reach, SchedulerError};
use crate::predictor::{PathCounts, PathValue, ValueField};
use crate::types::{GpId, Obs, SatId, SchedulePath, Time};

pub const ORACLE_MAX_SATS: usize = 3;
pub const ORACLE_MAX_GP: usize = 6;
pub const ORACLE_MAX_T: usize = 25;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub paths: Vec<SchedulePath>,
    pub value: PathValue,
    /// Search nodes visited.
    pub explored: u64,
}

#[derive(Clone, Copy)]
struct Node {
    obs: Obs,
    dir: Vector3<f64>,
    /// Ledger-only value: an upper bound on any marginal at this node.
    value: f64,
}

struct Search<'a> {
    reach: Reach<'a>,
    field: &'a ValueField,
    times: Vec<Time>,
    /// Per satellite, per step: reachable nodes with positive value.
    nodes: Vec<Vec<Vec<Node>>>,
    /// Per satellite: best standalone value of a chain starting at each node.
    chain_ub: Vec<Vec<Vec<f64>>>,
    anchors: Vec<Option<(Obs, Vector3<f64>)>>,
    best_value: f64,
    best_paths: Vec<Vec<Obs>>,
    explored: u64,
}

impl Search<'_> {
    fn reachable(&self, from: Option<&(Obs, Vector3<f64>)>, to: &Node) -> bool {
        match from {
            None => true,
            Some((o, d)) => self.reach.feasible(d, &to.dir, to.obs.t - o.t),
        }
    }

    /// Standalone upper bound for satellite `s` from step `i` on, given its last node.
    fn bound_from(&self, s: usize, last: Option<&(Obs, Vector3<f64>)>, i: usize) -> f64 {
        let mut best = 0.0f64;
        for j in i..self.times.len() {
            for (n, node) in self.nodes[s][j].iter().enumerate() {
                if self.chain_ub[s][j][n] > best && self.reachable(last, node) {
                    best = self.chain_ub[s][j][n];
                }
            }
        }
        best
    }

    fn counts(merged: &[Obs], gp: GpId) -> PathCounts {
        let mut c = PathCounts::default();
        for o in merged.iter().filter(|o| o.gp == gp) {
            c.count += 1;
            c.last = Some(o.t);
        }
        c
    }

    fn step(&mut self, i: usize, last: &mut Vec<Option<(Obs, Vector3<f64>)>>, paths: &mut Vec<Vec<Obs>>, merged: &mut Vec<Obs>, value: f64) {
        self.explored += 1;
        if value > self.best_value {
            self.best_value = value;
            self.best_paths = paths.clone();
        }
        if i == self.times.len() {
            return;
        }
        let ub: f64 = (0..last.len()).map(|s| self.bound_from(s, last[s].as_ref(), i)).sum();
        if value + ub <= self.best_value {
            return;
        }
        self.choose(i, 0, &mut BTreeSet::new(), last, paths, merged, value);
    }

    /// Assigns satellite `s` (and then the rest) at step `i`.
    #[allow(clippy::too_many_arguments)]
    fn choose(
        &mut self,
        i: usize,
        s: usize,
        claimed: &mut BTreeSet<GpId>,
        last: &mut Vec<Option<(Obs, Vector3<f64>)>>,
        paths: &mut Vec<Vec<Obs>>,
        merged: &mut Vec<Obs>,
        value: f64,
    ) {
        if s == last.len() {
            self.step(i + 1, last, paths, merged, value);
            return;
        }
        let mut options: Vec<(f64, Node)> = Vec::new();
        for node in &self.nodes[s][i] {
            if claimed.contains(&node.obs.gp) || !self.reachable(last[s].as_ref(), node) {
                continue;
            }
            let m = self.field.marginal(node.obs.gp, node.obs.t, Self::counts(merged, node.obs.gp));
            // a zero-value stop never helps: skipping it only shortens the next slew
            if m > 0.0 {
                options.push((m, *node));
            }
        }
        options.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.obs.gp.cmp(&b.1.obs.gp)));
        for (m, node) in options {
            let saved = last[s].replace((node.obs, node.dir));
            paths[s].push(node.obs);
            merged.push(node.obs);
            claimed.insert(node.obs.gp);
            self.choose(i, s + 1, claimed, last, paths, merged, value + m);
            claimed.remove(&node.obs.gp);
            merged.pop();
            paths[s].pop();
            last[s] = saved;
        }
        self.choose(i, s + 1, claimed, last, paths, merged, value);
    }
}

/// True optimum of the joint problem by depth-first enumeration. Refuses
/// instances beyond a few satellites, grid points and steps.
pub fn exhaustive_oracle<P: PlanningProblem + ?Sized>(
    problem: &P,
    sats: &[SatId],
    anchors: &[Option<Obs>],
    field: &ValueField,
) -> Result<OracleResult, SchedulerError> {
    let (h0, h1) = problem.horizon();
    let step = problem.step().max(1);
    let times: Vec<Time> = (h0..h1).step_by(step as usize).collect();
    let mut all_gps = BTreeSet::new();
    let mut scratch = Vec::new();
    for &s in sats {
        for &t in &times {
            problem.in_for(s, t, &mut scratch);
            all_gps.extend(scratch.iter().copied());
        }
    }
    if sats.len() > ORACLE_MAX_SATS || all_gps.len() > ORACLE_MAX_GP || times.len() > ORACLE_MAX_T {
        return Err(SchedulerError::TooLarge { sats: sats.len(), gps: all_gps.len(), steps: times.len() });
    }
    let reach = Reach::new(problem.slew_model());
    let mut nodes = Vec::new();
    for &s in sats {
        let mut per_t = Vec::new();
        for &t in &times {
            problem.in_for(s, t, &mut scratch);
            per_t.push(
                scratch
                    .iter()
                    .map(|&g| Node { obs: Obs::new(g, t), dir: problem.pointing(s, g, t), value: field.value_new(g, t) })
                    .filter(|n| n.value > 0.0)
                    .collect::<Vec<_>>(),
            );
        }
        nodes.push(per_t);
    }
    // backward chain bound ignoring decay between nodes
    let mut chain_ub = Vec::new();
    for per_t in &nodes {
        let mut ub: Vec<Vec<f64>> = per_t.iter().map(|v| vec![0.0; v.len()]).collect();
        for j in (0..times.len()).rev() {
            for (n, node) in per_t[j].iter().enumerate() {
                let mut tail = 0.0f64;
                for jj in j + 1..times.len() {
                    for (nn, next) in per_t[jj].iter().enumerate() {
                        if ub[jj][nn] > tail && reach.feasible(&node.dir, &next.dir, next.obs.t - node.obs.t) {
                            tail = ub[jj][nn];
                        }
                    }
                }
                ub[j][n] = node.value + tail;
            }
        }
        chain_ub.push(ub);
    }
    let anchor_dirs = sats
        .iter()
        .zip(anchors.iter().chain(std::iter::repeat(&None)))
        .map(|(&s, a)| a.map(|o| (o, problem.pointing(s, o.gp, o.t))))
        .collect::<Vec<_>>();
    let mut search = Search {
        reach,
        field,
        times,
        nodes,
        chain_ub,
        anchors: anchor_dirs.clone(),
        best_value: 0.0,
        best_paths: vec![Vec::new(); sats.len()],
        explored: 0,
    };
    let mut last = search.anchors.clone();
    let mut paths = vec![Vec::new(); sats.len()];
    search.step(0, &mut last, &mut paths, &mut Vec::new(), 0.0);
    let paths: Vec<SchedulePath> =
        sats.iter().zip(search.best_paths).map(|(&s, nodes)| SchedulePath::with_nodes(s, nodes)).collect();
    let n: usize = paths.iter().map(SchedulePath::len).sum();
    Ok(OracleResult { paths, value: PathValue::from_total(search.best_value, n), explored: search.explored })
}

#[cfg(test)]
mod tests {
    use super::super::{check_path, union_value, SyntheticProblem};
    use super::*;
    use crate::attitude::SlewModel;

    #[test]
    fn empty_instance() {
        let p = SyntheticProblem::line(vec![], 10, SlewModel::default());
        let f = p.uniform_values(&[]);
        let r = exhaustive_oracle(&p, &[SatId(0)], &[None], &f).unwrap();
        assert_eq!(r.value.total, 0.0);
        assert!(r.paths[0].is_empty());
    }

    #[test]
    fn single_feasible_path() {
        let p = SyntheticProblem::line(vec![0.0], 3, SlewModel::default());
        let f = p.uniform_values(&[9]);
        let r = exhaustive_oracle(&p, &[SatId(0)], &[None], &f).unwrap();
        assert_eq!(r.value.total, 9.0);
        assert_eq!(r.paths[0].len(), 1);
    }

    #[test]
    fn refuses_large() {
        let (p, f) = SyntheticProblem::random(1, 1, 5, 40, false);
        assert!(matches!(exhaustive_oracle(&p, &[SatId(0)], &[None], &f), Err(SchedulerError::TooLarge { .. })));
    }

    /// Plain enumeration of every feasible single-satellite path.
    fn brute(p: &SyntheticProblem, f: &ValueField) -> f64 {
        fn rec(p: &SyntheticProblem, f: &ValueField, path: &mut Vec<Obs>, best: &mut f64) {
            let sp = SchedulePath::with_nodes(SatId(0), path.clone());
            let v = union_value(std::slice::from_ref(&sp), f).total;
            if v > *best {
                *best = v;
            }
            let from = path.last().map_or(p.horizon.0, |o| o.t + 1);
            let mut gps = Vec::new();
            for t in from..p.horizon.1 {
                p.in_for(SatId(0), t, &mut gps);
                for &g in &gps {
                    let o = Obs::new(g, t);
                    if let Some(&l) = path.last() {
                        if p.slew_time(SatId(0), l, o) > (t - l.t) as f64 + 1e-9 {
                            continue;
                        }
                    }
                    path.push(o);
                    rec(p, f, path, best);
                    path.pop();
                }
            }
        }
        let mut best = 0.0;
        rec(p, f, &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn agrees_with_plain_enumeration() {
        for seed in 0..6 {
            let (p, f) = SyntheticProblem::random(seed, 1, 3, 12, false);
            let r = exhaustive_oracle(&p, &[SatId(0)], &[None], &f).unwrap();
            assert_eq!(r.value.total, brute(&p, &f), "seed {seed}");
            check_path(&p, &r.paths[0], None).unwrap();
            assert_eq!(union_value(&r.paths, &f).total, r.value.total);
        }
    }
}
