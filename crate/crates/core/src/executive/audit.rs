use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Geometry, Mode, RunOutput};
use crate::attitude::{eigen_angle_deg, PointingGeometry};
use crate::network::DeliveryStatus;
use crate::types::{Obs, SatId, Time};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checked: usize,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// No plan used a sample taken after it was made, or a peer sample before
/// the network (or a station downlink) had delivered it.
pub fn audit_causality(out: &RunOutput) -> AuditReport {
    let mut rep = AuditReport::default();
    let mut arrival: BTreeMap<(SatId, Obs), Time> = BTreeMap::new();
    for d in &out.deliveries {
        if let DeliveryStatus::Delivered { at, .. } = d.status {
            for &o in out.trail.bundle_contents.get(&d.bundle).into_iter().flatten() {
                let e = arrival.entry((d.dst, o)).or_insert(at);
                *e = (*e).min(at);
            }
        }
    }
    let downlinks: BTreeSet<(SatId, Time)> = out.trail.downlinks.iter().copied().collect();
    for u in &out.trail.used {
        rep.checked += 1;
        if u.obs.t > u.t_plan || u.known_since > u.t_plan {
            rep.violations.push(format!("{} plan at {} used {:?} known at {}", u.planner, u.t_plan, u.obs, u.known_since));
            continue;
        }
        let ok = match out.mode {
            Mode::Onboard if u.src == u.planner => u.known_since >= u.obs.t,
            Mode::Onboard => arrival.get(&(u.planner, u.obs)).is_some_and(|&at| at <= u.known_since),
            Mode::Ground => u.obs.t <= u.known_since && downlinks.contains(&(u.src, u.known_since)),
        };
        if !ok {
            rep.violations.push(format!(
                "{} plan at {} used {:?} from {} without delivery by {}",
                u.planner, u.t_plan, u.obs, u.src, u.known_since
            ));
        }
    }
    rep
}

/// Every executed observation was committed by a plan made no later than
/// itself, and no plan segment reaches back before its own planning time.
pub fn audit_additivity(out: &RunOutput) -> AuditReport {
    let mut rep = AuditReport::default();
    let mut committed: BTreeMap<(SatId, Obs), Time> = BTreeMap::new();
    for (sat, t_plan, nodes) in &out.trail.segments {
        for &o in nodes {
            rep.checked += 1;
            if o.t < *t_plan {
                rep.violations.push(format!("{sat} plan at {t_plan} edits the past with {:?}", o));
            }
            let e = committed.entry((*sat, o)).or_insert(*t_plan);
            *e = (*e).min(*t_plan);
        }
    }
    for ob in &out.observations {
        rep.checked += 1;
        let o = Obs::new(ob.gp, ob.t);
        match committed.get(&(ob.sat, o)) {
            Some(&tp) if tp <= ob.t => {}
            _ => rep.violations.push(format!("{} executed {:?} that no plan committed", ob.sat, o)),
        }
    }
    rep
}

/// Executed observations lie inside the field of regard and consecutive ones
/// leave enough time to slew.
pub fn audit_access(out: &RunOutput, geometry: &Geometry) -> AuditReport {
    let mut rep = AuditReport::default();
    let mut last: BTreeMap<SatId, Obs> = BTreeMap::new();
    for ob in &out.observations {
        rep.checked += 1;
        if !geometry.visible(ob.sat, ob.gp, ob.t) {
            rep.violations.push(format!("{} observed {} at {} out of view", ob.sat, ob.gp, ob.t));
        }
        let o = Obs::new(ob.gp, ob.t);
        if let Some(p) = last.insert(ob.sat, o) {
            let a = geometry.pointing(ob.sat, p.gp, p.t);
            let b = geometry.pointing(ob.sat, o.gp, o.t);
            let need = geometry.slew().time_for_angle(eigen_angle_deg(&a, &b));
            if o.t <= p.t || need > (o.t - p.t) as f64 + 1e-9 {
                rep.violations.push(format!("{} cannot slew {:?} -> {:?} ({need:.2} s)", ob.sat, p, o));
            }
        }
    }
    rep
}
