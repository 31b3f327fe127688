//! Random inventory operation sequences checked against a shadow model.

use std::collections::BTreeMap;

use foglet_core::inventory::{Inventory, InventoryError};
use foglet_core::model::{
    ApplicationComponent, Bandwidth, FlowEnd, FlowId, LinkId, NetworkReservation, NodeId,
    Placement, PlacementState, RequestId, ReservationId, ResourceVector, SimTime, TenantId,
    TrafficClass,
};
use foglet_core::topology::Topology;
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const OPS_PER_CASE: usize = 160;
const TTL: u64 = 1_000;

/// Hand-maintained expectation of what the inventory should hold.
#[derive(Default)]
struct Shadow {
    held: BTreeMap<ReservationId, (NodeId, ResourceVector, Vec<NetworkReservation>, u64)>,
    running: BTreeMap<RequestId, (NodeId, ResourceVector, Vec<NetworkReservation>)>,
    down: Vec<LinkId>,
}

impl Shadow {
    fn node_use(&self, node: &NodeId) -> (ResourceVector, ResourceVector) {
        let mut alloc = ResourceVector::ZERO;
        let mut held = ResourceVector::ZERO;
        for (n, r, _) in self.running.values() {
            if n == node {
                alloc = alloc.checked_add(r).unwrap();
            }
        }
        for (n, r, _, _) in self.held.values() {
            if n == node {
                held = held.checked_add(r).unwrap();
            }
        }
        (alloc, held)
    }

    fn link_use(&self, link: &LinkId) -> (u64, u64) {
        let (mut g, mut b) = (0, 0);
        let all = self
            .running
            .values()
            .flat_map(|x| &x.2)
            .chain(self.held.values().flat_map(|x| &x.2));
        for nr in all {
            if nr.path.links.contains(link) {
                match nr.class {
                    TrafficClass::Guaranteed => g += nr.bandwidth.bps(),
                    TrafficClass::BestEffort => b += nr.bandwidth.bps(),
                }
            }
        }
        (g, b)
    }
}

fn random_booking(rng: &mut ChaCha8Rng, topo: &Topology, k: usize) -> Option<NetworkReservation> {
    let nodes: Vec<NodeId> = topo.nodes().map(|n| n.id.clone()).collect();
    let a = nodes.choose(rng)?;
    let b = nodes.choose(rng)?;
    let path = topo.path_between(a, b, |_| Bandwidth::ZERO).ok()?;
    Some(NetworkReservation {
        flow: FlowId::new(format!("t/f{k}")),
        source: FlowEnd::Component {
            request: RequestId::new(format!("x{k}")),
            name: "a".into(),
        },
        sink: FlowEnd::Component {
            request: RequestId::new(format!("y{k}")),
            name: "b".into(),
        },
        path,
        bandwidth: Bandwidth::from_bps(rng.random_range(1..=40) * 500_000),
        class: if rng.random_bool(0.6) {
            TrafficClass::Guaranteed
        } else {
            TrafficClass::BestEffort
        },
        counterpart: None,
    })
}

fn draft(id: &RequestId) -> Placement {
    Placement {
        request_id: id.clone(),
        tenant: TenantId::new("t"),
        component: ApplicationComponent {
            name: id.to_string(),
            image: "img".into(),
            flows: Vec::new(),
        },
        traffic_class: TrafficClass::BestEffort,
        node_id: NodeId::new(""),
        allocated: ResourceVector::ZERO,
        network_reservations: Vec::new(),
        state: PlacementState::Running,
    }
}

fn check(inv: &Inventory, shadow: &Shadow, topo: &Topology) -> Result<(), TestCaseError> {
    let s = inv.state();
    for n in topo.nodes() {
        let ns = s.node(&n.id).unwrap();
        prop_assert!(
            (ns.allocated + ns.reserved).fits_within(&ns.capacity),
            "node {} over capacity",
            n.id
        );
        let (alloc, held) = shadow.node_use(&n.id);
        prop_assert_eq!(ns.allocated, alloc, "allocated on {}", n.id);
        prop_assert_eq!(ns.reserved, held, "reserved on {}", n.id);
    }
    for l in topo.links() {
        let ls = s.link(&l.id).unwrap();
        prop_assert!(ls.reserved <= ls.capacity, "link {} over capacity", l.id);
        let (g, b) = shadow.link_use(&l.id);
        prop_assert_eq!(ls.reserved.bps(), g);
        prop_assert_eq!(ls.best_effort.bps(), b);
        prop_assert_eq!(ls.up, !shadow.down.contains(&l.id));
    }
    s.check_invariants().map_err(TestCaseError::fail)?;
    Ok(())
}

/// Applies `ops` random inventory operations, checking the inventory against
/// a shadow model after each. Returns the number of operations applied.
pub fn run(seed: u64, ops: usize) -> Result<usize, TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=6);
    let topo = Topology::from_doc(&super::random_topology(&mut rng, n, false)).unwrap();
    let mut inv = Inventory::from_topology(&topo);
    let mut shadow = Shadow::default();
    for l in topo.links().filter(|l| !l.is_up()) {
        shadow.down.push(l.id.clone());
    }
    let node_ids: Vec<NodeId> = topo.nodes().map(|n| n.id.clone()).collect();
    let link_ids: Vec<LinkId> = topo.links().map(|l| l.id.clone()).collect();
    let mut now = 0u64;
    let mut seq = 0usize;

    for _ in 0..ops {
        seq += 1;
        let before = inv.snapshot();
        let failed = match rng.random_range(0..100) {
            0..=39 => {
                let node = if rng.random_bool(0.05) {
                    NodeId::new("ghost")
                } else {
                    node_ids.choose(&mut rng).unwrap().clone()
                };
                let res = ResourceVector::new(
                    rng.random_range(0..=4) * 500,
                    rng.random_range(0..=8) * 512,
                    rng.random_range(0..=20),
                );
                let network: Vec<_> = (0..rng.random_range(0..=2))
                    .filter_map(|i| random_booking(&mut rng, &topo, seq * 4 + i))
                    .collect();
                let expect_ok = shadow_accepts(&shadow, &inv, &node, &res, &network);
                let req = RequestId::new(format!("r{seq}"));
                match inv.hold(
                    &req,
                    &node,
                    res,
                    network.clone(),
                    SimTime::from_millis(now),
                    TTL,
                ) {
                    Ok(r) => {
                        prop_assert!(expect_ok, "hold should have failed");
                        shadow.held.insert(r.id, (node, res, network, now));
                        false
                    }
                    Err(e) => {
                        prop_assert!(!expect_ok, "hold should have succeeded: {}", e);
                        let expected_kind = matches!(
                            e,
                            InventoryError::UnknownNode(_)
                                | InventoryError::LinkDown(_)
                                | InventoryError::InsufficientResources { .. }
                        );
                        prop_assert!(expected_kind, "unexpected error {}", e);
                        true
                    }
                }
            }
            40..=59 => {
                let id = pick_reservation(&mut rng, &inv);
                let live = shadow.held.get(&id).filter(|h| now <= h.3 + TTL).cloned();
                let req = inv
                    .state()
                    .reservation(id)
                    .map(|r| r.request_id.clone())
                    .unwrap_or(RequestId::new("none"));
                match inv.commit(id, draft(&req), SimTime::from_millis(now)) {
                    Ok(()) => {
                        let (node, res, net, _) = live.expect("commit should have failed");
                        shadow.held.remove(&id);
                        shadow.running.insert(req, (node, res, net));
                        false
                    }
                    Err(_) => {
                        prop_assert!(live.is_none(), "commit should have succeeded");
                        true
                    }
                }
            }
            60..=69 => {
                let id = pick_reservation(&mut rng, &inv);
                match inv.release(id) {
                    Ok(()) => {
                        prop_assert!(shadow.held.remove(&id).is_some());
                        false
                    }
                    Err(_) => {
                        prop_assert!(!shadow.held.contains_key(&id));
                        true
                    }
                }
            }
            70..=84 => {
                now += rng.random_range(0..=600);
                let mut expired = inv.expire_reservations(SimTime::from_millis(now));
                expired.sort();
                let want: Vec<ReservationId> = shadow
                    .held
                    .iter()
                    .filter(|(_, h)| now > h.3 + TTL)
                    .map(|(id, _)| *id)
                    .collect();
                prop_assert_eq!(&expired, &want);
                shadow.held.retain(|id, _| !want.contains(id));
                false
            }
            85..=92 => {
                let node = node_ids.choose(&mut rng).unwrap().clone();
                let mut evicted = inv.evict_placements_on(&node).unwrap();
                evicted.sort();
                let want: Vec<RequestId> = shadow
                    .running
                    .iter()
                    .filter(|(_, p)| p.0 == node)
                    .map(|(id, _)| id.clone())
                    .collect();
                prop_assert_eq!(&evicted, &want);
                shadow.running.retain(|id, _| !want.contains(id));
                false
            }
            _ => {
                let Some(link) = link_ids.choose(&mut rng).cloned() else {
                    continue;
                };
                let up = rng.random_bool(0.5);
                let changed = inv.set_link_state(&link, up).unwrap();
                let was_up = !shadow.down.contains(&link);
                prop_assert_eq!(changed, was_up != up);
                shadow.down.retain(|l| *l != link);
                if !up {
                    shadow.down.push(link);
                }
                false
            }
        };
        if failed {
            prop_assert_eq!(&*inv.snapshot(), &*before, "failed operation changed state");
        }
        check(&inv, &shadow, &topo)?;
    }
    Ok(seq)
}

fn shadow_accepts(
    shadow: &Shadow,
    inv: &Inventory,
    node: &NodeId,
    res: &ResourceVector,
    network: &[NetworkReservation],
) -> bool {
    let Some(ns) = inv.state().node(node) else {
        return false;
    };
    let (alloc, held) = shadow.node_use(node);
    let Some(total) = alloc.checked_add(&held).and_then(|t| t.checked_add(res)) else {
        return false;
    };
    if !total.fits_within(&ns.capacity) {
        return false;
    }
    let mut need: BTreeMap<&LinkId, u64> = BTreeMap::new();
    for nr in network {
        for l in &nr.path.links {
            if shadow.down.contains(l) {
                return false;
            }
            if nr.class == TrafficClass::Guaranteed {
                *need.entry(l).or_default() += nr.bandwidth.bps();
            }
        }
    }
    need.into_iter().all(|(l, bps)| {
        let (g, b) = shadow.link_use(l);
        let cap = inv.state().link(l).unwrap().capacity.bps();
        bps <= cap.saturating_sub(g).saturating_sub(b)
    })
}

fn pick_reservation(rng: &mut ChaCha8Rng, inv: &Inventory) -> ReservationId {
    let ids: Vec<ReservationId> = inv.state().reservations.keys().copied().collect();
    match ids.choose(rng) {
        Some(id) if rng.random_bool(0.95) => *id,
        _ => ReservationId(9_999_999),
    }
}
