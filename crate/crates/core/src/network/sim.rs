use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{Bundle, BundleId, NetworkError, NetworkParams};
use crate::orbits::{Contact, ContactPlan, NodeId};
use crate::types::{RegionId, SatId, Time};

/// Every ground station is one logical node.
pub const GROUND: NodeId = NodeId::Ground(0);

fn merged(n: NodeId) -> NodeId {
    match n {
        NodeId::Ground(_) => GROUND,
        s => s,
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DeliveryStatus {
    Delivered { at: Time, hops: u32 },
    Dropped { at: Time },
    InFlight,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub bundle: BundleId,
    pub src: SatId,
    pub dst: SatId,
    pub region: RegionId,
    pub priority: u32,
    pub created_at: Time,
    pub ttl: Time,
    #[serde(flatten)]
    pub status: DeliveryStatus,
}

impl DeliveryRecord {
    pub fn latency(&self) -> Option<Time> {
        match self.status {
            DeliveryStatus::Delivered { at, .. } => Some(at - self.created_at),
            _ => None,
        }
    }
}

#[derive(Debug)]
struct Transfer {
    id: BundleId,
    remaining_bits: f64,
}

/// Epidemic store-and-forward over a contact plan. Each directed link sends
/// one bundle at a time, lowest priority ordinal first then oldest first,
/// and never interrupts a transmission for a later, more urgent bundle.
/// A transmission still running when the contact closes is lost; the
/// sender keeps its copy.
#[derive(Debug)]
pub struct NetworkState {
    params: NetworkParams,
    contacts: Vec<Contact>,
    next_contact: usize,
    active: Vec<usize>,
    bundles: Vec<Bundle>,
    status: Vec<DeliveryStatus>,
    stores: BTreeMap<NodeId, BTreeSet<(u32, Time, BundleId)>>,
    hops: HashMap<(NodeId, BundleId), u32>,
    seen: HashSet<(NodeId, BundleId)>,
    pending_expiry: BTreeSet<(Time, BundleId)>,
    transfers: BTreeMap<(NodeId, NodeId), Transfer>,
    inbox: BTreeMap<SatId, Vec<BundleId>>,
    clock: Time,
    bits_sent: f64,
}

impl NetworkState {
    pub fn new(plan: &ContactPlan, params: NetworkParams) -> Self {
        let mut contacts: Vec<Contact> = plan
            .contacts
            .iter()
            .map(|c| {
                let (a, b) = (merged(c.a), merged(c.b));
                let (a, b) = if a < b { (a, b) } else { (b, a) };
                Contact { a, b, ..c.clone() }
            })
            .collect();
        contacts.sort_by_key(|c| (c.start, c.a, c.b));
        NetworkState {
            params,
            contacts,
            next_contact: 0,
            active: Vec::new(),
            bundles: Vec::new(),
            status: Vec::new(),
            stores: BTreeMap::new(),
            hops: HashMap::new(),
            seen: HashSet::new(),
            pending_expiry: BTreeSet::new(),
            transfers: BTreeMap::new(),
            inbox: BTreeMap::new(),
            clock: Time::MIN,
            bits_sent: 0.0,
        }
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    /// Hands a bundle to its source node. `id` and `size_bits` are assigned here.
    pub fn submit(&mut self, mut bundle: Bundle) -> BundleId {
        let id = self.bundles.len() as BundleId;
        bundle.id = id;
        bundle.size_bits = self.params.bundle_size_bits;
        let src = NodeId::Sat(bundle.src);
        if bundle.ttl <= 0 || bundle.src == bundle.dst {
            self.status.push(DeliveryStatus::Dropped { at: bundle.created_at });
        } else {
            self.status.push(DeliveryStatus::InFlight);
            self.stores.entry(src).or_default().insert((bundle.priority, bundle.created_at, id));
            self.hops.insert((src, id), 0);
            self.seen.insert((src, id));
            self.pending_expiry.insert((bundle.expires_at(), id));
        }
        self.bundles.push(bundle);
        id
    }

    pub fn bundle(&self, id: BundleId) -> &Bundle {
        &self.bundles[id as usize]
    }

    pub fn n_bundles(&self) -> usize {
        self.bundles.len()
    }

    pub fn bits_sent(&self) -> f64 {
        self.bits_sent
    }

    /// Bundles delivered to `sat` since the last drain with their arrival
    /// times, in arrival order.
    pub fn drain_inbox(&mut self, sat: SatId) -> Vec<(Bundle, Time)> {
        let ids = self.inbox.remove(&sat).unwrap_or_default();
        ids.into_iter()
            .map(|id| {
                let at = match self.status[id as usize] {
                    DeliveryStatus::Delivered { at, .. } => at,
                    _ => unreachable!("inbox holds delivered bundles only"),
                };
                (self.bundles[id as usize].clone(), at)
            })
            .collect()
    }

    pub fn records(&self) -> Vec<DeliveryRecord> {
        self.bundles
            .iter()
            .zip(&self.status)
            .map(|(b, &status)| DeliveryRecord {
                bundle: b.id,
                src: b.src,
                dst: b.dst,
                region: b.payload.region,
                priority: b.priority,
                created_at: b.created_at,
                ttl: b.ttl,
                status,
            })
            .collect()
    }

    fn expire(&mut self, t: Time) {
        while let Some(&(at, id)) = self.pending_expiry.first() {
            if at > t {
                break;
            }
            self.pending_expiry.pop_first();
            if self.status[id as usize] == DeliveryStatus::InFlight {
                self.status[id as usize] = DeliveryStatus::Dropped { at };
            }
        }
    }

    fn refresh_contacts(&mut self, t: Time) {
        while self.next_contact < self.contacts.len() && self.contacts[self.next_contact].start <= t {
            self.active.push(self.next_contact);
            self.next_contact += 1;
        }
        let contacts = &self.contacts;
        self.active.retain(|&i| contacts[i].end > t);
    }

    /// Next bundle `from` should send to `to`, dropping expired copies on the way.
    fn pick(&mut self, from: NodeId, to: NodeId, t: Time) -> Option<BundleId> {
        let store = self.stores.get_mut(&from)?;
        let mut stale = Vec::new();
        let mut found = None;
        for &key in store.iter() {
            let id = key.2;
            if self.bundles[id as usize].expires_at() <= t {
                stale.push(key);
                continue;
            }
            if !self.seen.contains(&(to, id)) {
                found = Some(id);
                break;
            }
        }
        for k in stale {
            store.remove(&k);
        }
        found
    }

    /// Advances the network over `[t, t + dt)`. Contacts are evaluated at `t`.
    pub fn step(&mut self, t: Time, dt: Time) -> Result<(), NetworkError> {
        if dt <= 0 {
            return Err(NetworkError::BadStep(dt));
        }
        self.clock = self.clock.max(t);
        self.expire(t);
        self.refresh_contacts(t);

        let mut links: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
        for &i in &self.active {
            let c = &self.contacts[i];
            let r = c.range_at(t);
            let e = links.entry((c.a, c.b)).or_insert(f64::INFINITY);
            *e = e.min(r);
        }
        self.transfers.retain(|pair, _| {
            let key = if pair.0 < pair.1 { *pair } else { (pair.1, pair.0) };
            links.contains_key(&key)
        });

        let mut arrivals: Vec<(NodeId, BundleId, Time, u32)> = Vec::new();
        for (&(a, b), &range) in &links {
            let rate = self.params.rate_table.rate(range);
            if rate <= 0.0 {
                self.transfers.remove(&(a, b));
                self.transfers.remove(&(b, a));
                continue;
            }
            for (from, to) in [(a, b), (b, a)] {
                let mut clock = t as f64;
                let end = (t + dt) as f64;
                while clock < end {
                    let id = match self.transfers.get(&(from, to)) {
                        Some(tr) => tr.id,
                        None => {
                            let Some(id) = self.pick(from, to, t) else { break };
                            let bits = self.bundles[id as usize].size_bits as f64;
                            self.transfers.insert((from, to), Transfer { id, remaining_bits: bits });
                            id
                        }
                    };
                    let tr = self.transfers.get_mut(&(from, to)).expect("transfer");
                    let need = tr.remaining_bits / rate;
                    if clock + need <= end + 1e-9 {
                        clock += need;
                        self.bits_sent += tr.remaining_bits;
                        self.transfers.remove(&(from, to));
                        let at = clock.ceil() as Time;
                        let b = &self.bundles[id as usize];
                        if at <= b.expires_at() {
                            let h = self.hops.get(&(from, id)).copied().unwrap_or(0) + 1;
                            arrivals.push((to, id, at, h));
                        }
                    } else {
                        let sent = (end - clock) * rate;
                        tr.remaining_bits -= sent;
                        self.bits_sent += sent;
                        clock = end;
                    }
                }
            }
        }

        for (node, id, at, hops) in arrivals {
            if !self.seen.insert((node, id)) {
                continue;
            }
            let b = &self.bundles[id as usize];
            if node == NodeId::Sat(b.dst) {
                if self.status[id as usize] == DeliveryStatus::InFlight {
                    self.status[id as usize] = DeliveryStatus::Delivered { at, hops };
                    self.inbox.entry(b.dst).or_default().push(id);
                }
            } else {
                self.stores.entry(node).or_default().insert((b.priority, b.created_at, id));
                self.hops.insert((node, id), hops);
            }
        }
        self.clock = t + dt;
        Ok(())
    }

    /// Steps one second at a time until `until`.
    pub fn run_until(&mut self, from: Time, until: Time) -> Result<(), NetworkError> {
        for t in from..until {
            self.step(t, 1)?;
        }
        self.expire(until);
        Ok(())
    }

    /// Marks everything that expired by `t` as dropped without moving data.
    pub fn settle(&mut self, t: Time) {
        self.expire(t);
    }
}
