//! Random topology and request generators plus brute-force reference
//! implementations of path selection and node choice.
#![allow(dead_code)]

use std::collections::BTreeMap;

use foglet_core::config::EngineConfig;
use foglet_core::inventory::InventoryState;
use foglet_core::model::{
    validate_request, AccessRightsDoc, Bandwidth, ComponentDoc, ComponentSpecDoc, ComputeDoc,
    DeploymentRequest, FlowDoc, FlowPeer, LinkId, LocationDoc, NetworkDoc, NetworkProfile, NodeId,
    PeerDoc, RequestDoc, RequestId, Requirement, RequirementDoc, ResourceVector, SimTime, Tier,
};
use foglet_core::topology::{
    EndpointDoc, LinkDoc, LinkStatus, NodeDoc, Path, Topology, TopologyDoc,
};
use rand::seq::IndexedRandom;
use rand::Rng;

/// Proptest settings without failure files, which integration tests have no
/// source root for.
pub fn cases(n: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases: n,
        failure_persistence: None,
        ..Default::default()
    }
}

pub mod flows;
pub mod inventory;
pub mod scheduling;

pub const LABELS: [&str; 2] = ["cam", "gpu"];

/// A connected-ish random graph of `n` nodes. With `tree` set the links form
/// a spanning tree and are all up; otherwise extra (possibly parallel) links
/// are added and some links start down.
pub fn random_topology<R: Rng>(rng: &mut R, n: usize, tree: bool) -> TopologyDoc {
    let tiers = [
        Tier::Cloud,
        Tier::EdgeCloudlet,
        Tier::EdgeGateway,
        Tier::SwarmOfThings,
    ];
    let nodes = (0..n)
        .map(|i| {
            let mut node = NodeDoc {
                id: format!("n{i}"),
                tier: tiers[rng.random_range(0..3)],
                region: format!("r{}", rng.random_range(0..3)),
                vcpus: rng.random_range(1..=16) as f64 / 2.0,
                ram_mib: 256 * rng.random_range(1..=32),
                disk_gib: rng.random_range(1..=100),
                labels: LABELS
                    .iter()
                    .filter(|_| rng.random_bool(0.4))
                    .map(|s| s.to_string())
                    .collect(),
                cache_mib: if rng.random_bool(0.3) { 16 } else { 0 },
            };
            if rng.random_bool(0.1) {
                node.tier = Tier::SwarmOfThings;
                (node.vcpus, node.ram_mib, node.disk_gib, node.cache_mib) = (0.0, 0, 0, 0);
            }
            node
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 1..n {
        pairs.push((rng.random_range(0..i), i));
    }
    if !tree {
        for _ in 0..rng.random_range(0..=n) {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b {
                pairs.push((a, b));
            }
        }
    }
    let links = pairs
        .into_iter()
        .enumerate()
        .map(|(k, (a, b))| LinkDoc {
            id: format!("l{k}"),
            a: format!("n{a}"),
            b: format!("n{b}"),
            bandwidth_mbps: *[1.0, 2.0, 5.0, 10.0, 20.0, 100.0].choose(rng).unwrap(),
            latency_ms: rng.random_range(1..=60) as f64,
            jitter_ms: rng.random_range(0..=6) as f64,
            state: if !tree && rng.random_bool(0.15) {
                LinkStatus::Down
            } else {
                LinkStatus::Up
            },
        })
        .collect();
    let endpoints = (0..rng.random_range(1..=3))
        .map(|i| EndpointDoc {
            id: format!("e{i}"),
            node: format!("n{}", rng.random_range(0..n)),
            kind: "sensor".into(),
        })
        .collect();
    TopologyDoc {
        nodes,
        links,
        endpoints,
    }
}

/// A random valid request named `name` with endpoint flows only.
pub fn random_request<R: Rng>(
    rng: &mut R,
    topo: &Topology,
    id: &str,
    name: &str,
) -> DeploymentRequest {
    let endpoints: Vec<String> = topo.endpoints().map(|e| e.id.as_str().to_owned()).collect();
    let regions: Vec<String> = topo.nodes().map(|n| n.region.as_str().to_owned()).collect();
    let mut requirements = Vec::new();
    if rng.random_bool(0.7) {
        let profiles = [
            "GeneralPurpose",
            "ComputeOptimized",
            "MemoryOptimized",
            "StorageOptimized",
        ];
        requirements.push(RequirementDoc::Compute(ComputeDoc {
            profile: rng
                .random_bool(0.6)
                .then(|| profiles.choose(rng).unwrap().to_string()),
            vcpus: rng
                .random_bool(0.9)
                .then(|| rng.random_range(1..=8) as f64 / 2.0),
            ram_mib: rng
                .random_bool(0.8)
                .then(|| (128 * rng.random_range(1..=24)) as f64),
            disk_gib: rng
                .random_bool(0.5)
                .then(|| rng.random_range(1..=40) as f64),
        }));
    }
    if rng.random_bool(0.3) {
        requirements.push(RequirementDoc::Location(LocationDoc {
            region: regions.choose(rng).unwrap().clone(),
        }));
    }
    if rng.random_bool(0.25) {
        requirements.push(RequirementDoc::AccessRights(AccessRightsDoc {
            label: LABELS.choose(rng).unwrap().to_string(),
        }));
    }
    let net_profiles = [
        "BestEffort",
        "InteractiveApplication",
        "SignalingAndVideoStreaming",
        "InteractiveRealTimeVideo",
    ];
    for ep in &endpoints {
        if !rng.random_bool(0.35) {
            continue;
        }
        requirements.push(RequirementDoc::Network(NetworkDoc {
            profile: rng
                .random_bool(0.8)
                .then(|| net_profiles.choose(rng).unwrap().to_string()),
            endpoint: ep.clone(),
        }));
    }
    let mut flows = Vec::new();
    for ep in &endpoints {
        let rate = *[0.1, 0.5, 1.0, 2.0, 4.0].choose(rng).unwrap();
        if rng.random_bool(0.3) {
            flows.push(FlowDoc {
                from: Some(PeerDoc::Endpoint(ep.clone())),
                to: None,
                rate_mbps: rate,
            });
        }
        if rng.random_bool(0.15) {
            flows.push(FlowDoc {
                from: None,
                to: Some(PeerDoc::Endpoint(ep.clone())),
                rate_mbps: rate,
            });
        }
    }
    let doc = RequestDoc {
        id: Some(id.to_owned()),
        tenant: None,
        component: ComponentDoc::Spec(ComponentSpecDoc {
            name: name.to_owned(),
            image: None,
            flows,
        }),
        requirements,
        submitted_at_ms: None,
    };
    validate_request(
        &doc,
        topo,
        EngineConfig::default().default_footprint,
        &RequestId::new(id),
        SimTime::ZERO,
    )
    .expect("generated requests are valid")
}

/// Every simple path from `a` to `b` over up links, as (links, nodes).
pub fn simple_paths(topo: &Topology, a: &NodeId, b: &NodeId) -> Vec<Path> {
    fn walk(topo: &Topology, at: &NodeId, dst: &NodeId, cur: &mut Path, out: &mut Vec<Path>) {
        if at == dst {
            out.push(cur.clone());
            return;
        }
        for link in topo
            .links()
            .filter(|l| l.is_up() && (l.a == *at || l.b == *at))
        {
            let next = link.other_end(at).clone();
            if cur.nodes.contains(&next) {
                continue;
            }
            cur.links.push(link.id.clone());
            cur.nodes.push(next.clone());
            walk(topo, &next, dst, cur, out);
            cur.links.pop();
            cur.nodes.pop();
        }
    }
    let mut out = Vec::new();
    walk(topo, a, b, &mut Path::empty(a.clone()), &mut out);
    out
}

pub fn bottleneck(path: &Path, residual: &dyn Fn(&LinkId) -> Bandwidth) -> Bandwidth {
    path.links
        .iter()
        .map(residual)
        .min()
        .unwrap_or(Bandwidth::INFINITE)
}

/// Fewest hops, then widest bottleneck, then smallest link sequence read
/// from the smaller endpoint id.
pub fn oracle_path(
    topo: &Topology,
    a: &NodeId,
    b: &NodeId,
    residual: &dyn Fn(&LinkId) -> Bandwidth,
) -> Option<Path> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let best = simple_paths(topo, lo, hi).into_iter().min_by(|x, y| {
        x.hops()
            .cmp(&y.hops())
            .then(bottleneck(y, residual).cmp(&bottleneck(x, residual)))
            .then(x.links.cmp(&y.links))
    })?;
    Some(if a <= b { best } else { best.reversed() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleScore {
    pub node: NodeId,
    pub score: f64,
}

fn weights_of(profile: foglet_core::model::ComputeProfile) -> [f64; 3] {
    use foglet_core::model::ComputeProfile::*;
    match profile {
        GeneralPurpose => [1.0 / 3.0; 3],
        ComputeOptimized => [0.6, 0.2, 0.2],
        MemoryOptimized => [0.2, 0.6, 0.2],
        StorageOptimized => [0.2, 0.2, 0.6],
    }
}

fn tier_weight(t: Tier) -> f64 {
    match t {
        Tier::Cloud => 1.0,
        Tier::EdgeCloudlet => 0.6,
        Tier::EdgeGateway => 0.3,
        Tier::SwarmOfThings => 0.0,
    }
}

/// Scores of every node that can host `req`, by exhaustive evaluation.
/// Handles requests whose flows all go to endpoints.
pub fn oracle_scores(
    topo: &Topology,
    state: &InventoryState,
    cfg: &EngineConfig,
    req: &DeploymentRequest,
) -> Vec<OracleScore> {
    let residual = |l: &LinkId| {
        state.links[l]
            .capacity
            .saturating_sub(state.links[l].reserved)
            .saturating_sub(state.links[l].best_effort)
    };
    let (profile, need) = req
        .requirements
        .iter()
        .find_map(|r| match r {
            Requirement::Compute { profile, request } => Some((*profile, *request)),
            _ => None,
        })
        .unwrap_or((Default::default(), cfg.default_footprint));
    let guaranteed = req.requirements.iter().any(|r| {
        matches!(r, Requirement::Network { profile, .. } if *profile != NetworkProfile::BestEffort)
    });
    let mut out = Vec::new();
    'nodes: for node in topo.nodes().filter(|n| n.tier != Tier::SwarmOfThings) {
        let ns = &state.nodes[&node.id];
        let used = ns.allocated + ns.reserved;
        let free = ResourceVector::new(
            ns.capacity.millicpus.saturating_sub(used.millicpus),
            ns.capacity.ram_mib.saturating_sub(used.ram_mib),
            ns.capacity.disk_gib.saturating_sub(used.disk_gib),
        );
        if need.millicpus > free.millicpus
            || need.ram_mib > free.ram_mib
            || need.disk_gib > free.disk_gib
        {
            continue;
        }
        let mut slacks = Vec::new();
        for r in &req.requirements {
            match r {
                Requirement::Location { region } if node.region != *region => continue 'nodes,
                Requirement::AccessRights { label } if !node.labels.contains(label) => {
                    continue 'nodes
                }
                Requirement::Network { profile, endpoint } => {
                    let ep = topo.endpoint(endpoint).unwrap();
                    let Some(path) = oracle_path(topo, &node.id, &ep.attached_node, &residual)
                    else {
                        continue 'nodes;
                    };
                    let bw = bottleneck(&path, &residual);
                    let lat: f64 = path
                        .links
                        .iter()
                        .map(|l| topo.link(l).unwrap().latency_ms)
                        .sum();
                    let jit: f64 = path
                        .links
                        .iter()
                        .map(|l| topo.link(l).unwrap().jitter_ms)
                        .sum();
                    let th = cfg.thresholds[*profile];
                    if th.min_bandwidth.is_some_and(|m| bw < m)
                        || th.max_latency_ms.is_some_and(|m| lat > m)
                        || th.max_jitter_ms.is_some_and(|m| jit > m)
                    {
                        continue 'nodes;
                    }
                    slacks.push(match th.min_bandwidth {
                        Some(m) if m.bps() > 0 && !bw.is_infinite() => {
                            (bw.bps() as f64 / (2.0 * m.bps() as f64)).min(1.0)
                        }
                        _ => 1.0,
                    });
                }
                _ => {}
            }
        }
        let mut load: BTreeMap<LinkId, u64> = BTreeMap::new();
        let mut seen = Vec::new();
        for f in &req.component.flows {
            let FlowPeer::Endpoint(e) = &f.peer else {
                panic!("oracle handles endpoint flows only")
            };
            if seen.contains(&(e.clone(), f.direction)) {
                continue;
            }
            seen.push((e.clone(), f.direction));
            let ep = topo.endpoint(e).unwrap();
            let Some(path) = oracle_path(topo, &node.id, &ep.attached_node, &residual) else {
                continue 'nodes;
            };
            if guaranteed {
                for l in path.links {
                    *load.entry(l).or_default() += f.rate.bps();
                }
            }
        }
        if load.iter().any(|(l, bps)| *bps > residual(l).bps()) {
            continue;
        }
        let frac = |f: u64, c: u64| if c == 0 { 0.0 } else { f as f64 / c as f64 };
        let w = weights_of(profile);
        let cap = node.capacity;
        let capacity_fit = w[0] * frac(free.millicpus - need.millicpus, cap.millicpus)
            + w[1] * frac(free.ram_mib - need.ram_mib, cap.ram_mib)
            + w[2] * frac(free.disk_gib - need.disk_gib, cap.disk_gib);
        let network_slack = if slacks.is_empty() {
            1.0
        } else {
            slacks.iter().sum::<f64>() / slacks.len() as f64
        };
        let wt = cfg.weights;
        out.push(OracleScore {
            node: node.id.clone(),
            score: wt.capacity * capacity_fit
                + wt.network * network_slack
                + wt.tier * tier_weight(node.tier),
        });
    }
    out
}

/// Highest score; ties go to the smallest node id.
pub fn oracle_choice(scores: &[OracleScore]) -> Option<NodeId> {
    let mut best: Option<&OracleScore> = None;
    for s in scores {
        best = match best {
            Some(b) if b.score > s.score || (b.score == s.score && b.node < s.node) => Some(b),
            _ => Some(s),
        };
    }
    best.map(|b| b.node.clone())
}
