//! Benchmark fixtures shared by the criterion benches.

use agilesim::network::{Bundle, BundlePayload, NetworkParams, NetworkState};
use agilesim::orbits::{Contact, ContactPlan, NodeId};
use agilesim::predictor::ValueField;
use agilesim::scenario::ValueFieldInit;
use agilesim::scheduler::{SyntheticProblem, SyntheticSat};
use agilesim::{RegionId, SatId, SlewModel, Time};

/// One slow satellite with `n_gp` grid points in view for the whole horizon.
pub fn hover_problem(n_gp: usize, horizon_s: Time) -> (SyntheticProblem, ValueField) {
    // fixed quasi-random layout, golden-angle spiral
    let gps = (0..n_gp)
        .map(|i| {
            let r = 150.0 * ((i as f64 + 0.5) / n_gp as f64).sqrt();
            let a = i as f64 * 2.399_963;
            (r * a.cos(), r * a.sin())
        })
        .collect();
    let p = SyntheticProblem {
        horizon: (0, horizon_s),
        altitude_km: 710.0,
        sats: vec![SyntheticSat { x0_km: -60.0, y_km: 0.0, speed_km_s: 0.05 }],
        gps,
        slew: SlewModel::default(),
        for_half_angle_deg: 55.0,
    };
    let n_slots = (horizon_s as usize).div_ceil(900);
    let mut init = ValueFieldInit::filled((0..n_gp as u32).collect(), n_gp, n_slots, 900);
    for (i, v) in init.values.iter_mut().enumerate() {
        *v = (37 + i * 97 % 211) as u8;
    }
    (p, ValueField::from_init(&init, 900))
}

/// Ring of `n` satellites with staggered pairwise contacts and `bundles`
/// bundles injected at t = 0 between opposite nodes.
pub fn ring_network(n: u32, bundles: usize, horizon_s: Time) -> NetworkState {
    let mut contacts = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        let (a, b) = (i.min(j), i.max(j));
        let mut s = (i as Time * 37) % 120;
        while s < horizon_s {
            contacts.push(Contact {
                a: NodeId::Sat(SatId(a)),
                b: NodeId::Sat(SatId(b)),
                start: s,
                end: (s + 90).min(horizon_s),
                step: 90,
                ranges_km: vec![2000.0],
            });
            s += 240;
        }
    }
    contacts.sort_by_key(|c| (c.start, c.a, c.b));
    let mut net = NetworkState::new(&ContactPlan { contacts }, NetworkParams::default());
    for k in 0..bundles {
        let src = k as u32 % n;
        net.submit(Bundle {
            id: 0,
            src: SatId(src),
            dst: SatId((src + n / 2) % n),
            created_at: 0,
            ttl: horizon_s,
            size_bits: 0,
            priority: (k % 4) as u32,
            payload: BundlePayload { region: RegionId(0), samples: vec![], ratios: vec![] },
        });
    }
    net
}
