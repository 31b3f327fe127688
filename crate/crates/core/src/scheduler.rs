//! Filter, rank, choose and deploy.
//!
//! Filtering and ranking are pure functions of an [`InventoryView`], the
//! topology and the configuration. Each hostable node is evaluated
//! independently, so [`rank`] fans the evaluation out over a thread pool when
//! the `parallel` feature is enabled.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::flowsim::FlowSim;
use crate::inventory::{Inventory, InventoryError, InventoryView};
use crate::model::{
    flow_id, ApplicationComponent, Bandwidth, ComputeProfile, DeploymentRequest, FlowDirection,
    FlowEnd, FlowId, FlowPeer, LinkId, NetworkReservation, NodeId, Placement, PlacementState,
    Requirement, ReservationId, ResourceVector, SimTime, Tier,
};
use crate::topology::{LinkTable, Node, PathMetrics, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential evaluation without the `parallel` feature.
    #[default]
    Parallel,
}

/// Everything the pure scheduling functions read.
#[derive(Clone)]
pub struct SchedulingContext<'a> {
    pub topology: &'a Topology,
    pub view: &'a InventoryView,
    pub config: &'a EngineConfig,
    /// Residual bandwidth of every link in `view`.
    pub residuals: LinkTable,
}

impl<'a> SchedulingContext<'a> {
    pub fn new(topology: &'a Topology, view: &'a InventoryView, config: &'a EngineConfig) -> Self {
        SchedulingContext {
            topology,
            view,
            config,
            residuals: topology.link_table(|l| view.residual(l)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CheckKind {
    Compute,
    Location,
    AccessRights,
    Network,
    /// Bandwidth booking for the component's declared flows.
    FlowAdmission,
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub kind: CheckKind,
    pub requirement: String,
    pub passed: bool,
    pub measured: String,
    /// Why the check failed; empty when it passed.
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub node: NodeId,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl FilterVerdict {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subscores {
    pub capacity_fit: f64,
    pub network_slack: f64,
    pub tier_preference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredNode {
    pub node: NodeId,
    pub score: f64,
    pub subscores: Subscores,
}

/// The full evaluation of one node for one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEvaluation {
    pub verdict: FilterVerdict,
    /// Present iff the node passed filtering.
    pub scored: Option<ScoredNode>,
    /// Bandwidth bookings the placement would make on this node.
    pub bookings: Vec<NetworkReservation>,
}

pub fn tier_preference(tier: Tier) -> f64 {
    match tier {
        Tier::Cloud => 1.0,
        Tier::EdgeCloudlet => 0.6,
        Tier::EdgeGateway => 0.3,
        Tier::SwarmOfThings => 0.0,
    }
}

/// The resources a request would occupy: its compute requirement, or the
/// configured default footprint.
pub fn footprint(
    request: &DeploymentRequest,
    config: &EngineConfig,
) -> (ComputeProfile, ResourceVector) {
    request
        .compute_requirement()
        .unwrap_or((ComputeProfile::GeneralPurpose, config.default_footprint))
}

fn free_on(ctx: &SchedulingContext<'_>, node: &NodeId) -> ResourceVector {
    ctx.view.node(node).map(|n| n.free()).unwrap_or_default()
}

fn path_to_endpoint(
    ctx: &SchedulingContext<'_>,
    node: &NodeId,
    endpoint: &crate::model::EndpointId,
) -> Option<PathMetrics> {
    let ep = ctx.topology.endpoint(endpoint)?;
    let path = ctx
        .topology
        .path_between_in(node, &ep.attached_node, &ctx.residuals)
        .ok()?;
    Some(ctx.topology.path_metrics(&path, |l| ctx.view.residual(l)))
}

fn shortfall_text(need: &ResourceVector, free: &ResourceVector) -> String {
    let mut parts = Vec::new();
    if need.millicpus > free.millicpus {
        parts.push(format!(
            "vcpus shortfall {}",
            (need.millicpus - free.millicpus) as f64 / 1000.0
        ));
    }
    if need.ram_mib > free.ram_mib {
        parts.push(format!("ram shortfall {} MiB", need.ram_mib - free.ram_mib));
    }
    if need.disk_gib > free.disk_gib {
        parts.push(format!(
            "disk shortfall {} GiB",
            need.disk_gib - free.disk_gib
        ));
    }
    format!("insufficient resources: {}", parts.join(", "))
}

fn mbps(b: Bandwidth) -> String {
    if b.is_infinite() {
        "unbounded".to_owned()
    } else {
        format!("{} Mbit/s", b.mbps())
    }
}

/// Evaluates every requirement of `request` against `node`.
pub fn evaluate(
    ctx: &SchedulingContext<'_>,
    request: &DeploymentRequest,
    node: &Node,
) -> NodeEvaluation {
    let (_, need) = footprint(request, ctx.config);
    let free = free_on(ctx, &node.id);
    let mut checks = Vec::new();

    let fits = need.fits_within(&free);
    checks.push(Check {
        kind: CheckKind::Compute,
        requirement: match request.compute_requirement() {
            Some((profile, r)) => Requirement::Compute {
                profile,
                request: r,
            }
            .to_string(),
            None => format!("default footprint {need}"),
        },
        passed: fits,
        measured: format!("free {free}"),
        detail: if fits {
            String::new()
        } else {
            shortfall_text(&need, &free)
        },
    });

    for req in &request.requirements {
        match req {
            Requirement::Location { region } => {
                let ok = node.region == *region;
                checks.push(Check {
                    kind: CheckKind::Location,
                    requirement: req.to_string(),
                    passed: ok,
                    measured: format!("region {}", node.region),
                    detail: if ok {
                        String::new()
                    } else {
                        format!("node is in region {}, not {region}", node.region)
                    },
                });
            }
            Requirement::AccessRights { label } => {
                let ok = node.labels.contains(label);
                checks.push(Check {
                    kind: CheckKind::AccessRights,
                    requirement: req.to_string(),
                    passed: ok,
                    measured: format!(
                        "labels [{}]",
                        node.labels.iter().cloned().collect::<Vec<_>>().join(", ")
                    ),
                    detail: if ok {
                        String::new()
                    } else {
                        format!("node lacks label {label}")
                    },
                });
            }
            _ => {}
        }
    }

    let mut bottlenecks = Vec::new();
    for (profile, endpoint) in request.network_requirements() {
        let requirement = Requirement::Network {
            profile,
            endpoint: endpoint.clone(),
        }
        .to_string();
        let threshold = ctx.config.thresholds[profile];
        let Some(m) = path_to_endpoint(ctx, &node.id, endpoint) else {
            bottlenecks.push((threshold.min_bandwidth, None));
            checks.push(Check {
                kind: CheckKind::Network,
                requirement,
                passed: false,
                measured: "unreachable".to_owned(),
                detail: format!("unreachable: no path of up links to {endpoint}"),
            });
            continue;
        };
        bottlenecks.push((threshold.min_bandwidth, Some(m.bottleneck)));
        let mut problems = Vec::new();
        if let Some(min) = threshold.min_bandwidth {
            if m.bottleneck < min {
                problems.push(format!(
                    "insufficient bandwidth: bottleneck {} < {}",
                    mbps(m.bottleneck),
                    mbps(min)
                ));
            }
        }
        if let Some(max) = threshold.max_latency_ms {
            if m.latency_ms > max {
                problems.push(format!("latency {} ms > {max} ms", m.latency_ms));
            }
        }
        if let Some(max) = threshold.max_jitter_ms {
            if m.jitter_ms > max {
                problems.push(format!("jitter {} ms > {max} ms", m.jitter_ms));
            }
        }
        checks.push(Check {
            kind: CheckKind::Network,
            requirement,
            passed: problems.is_empty(),
            measured: format!(
                "bottleneck {}, latency {} ms, jitter {} ms, {} hops",
                mbps(m.bottleneck),
                m.latency_ms,
                m.jitter_ms,
                m.hops
            ),
            detail: problems.join("; "),
        });
    }

    let bookings = match plan_flows(ctx, request, &node.id) {
        Ok(b) => {
            if !b.is_empty() {
                checks.push(flow_admission(ctx, &b));
            }
            b
        }
        Err(detail) => {
            checks.push(Check {
                kind: CheckKind::FlowAdmission,
                requirement: "flows".to_owned(),
                passed: false,
                measured: "unroutable".to_owned(),
                detail,
            });
            Vec::new()
        }
    };

    let passed = checks.iter().all(|c| c.passed);
    let scored = passed.then(|| score(ctx, request, node, &bottlenecks));
    NodeEvaluation {
        verdict: FilterVerdict {
            node: node.id.clone(),
            passed,
            checks,
        },
        scored,
        bookings,
    }
}

fn flow_admission(ctx: &SchedulingContext<'_>, bookings: &[NetworkReservation]) -> Check {
    let mut need: BTreeMap<&LinkId, Bandwidth> = BTreeMap::new();
    for b in bookings {
        if b.class == crate::model::TrafficClass::Guaranteed {
            for l in &b.path.links {
                *need.entry(l).or_default() += b.bandwidth;
            }
        }
    }
    let mut problems = Vec::new();
    let mut tightest: Option<(&LinkId, Bandwidth)> = None;
    for (l, bw) in &need {
        let residual = ctx.view.residual(l);
        if *bw > residual {
            problems.push(format!(
                "insufficient bandwidth on link {l}: need {}, residual {}",
                mbps(*bw),
                mbps(residual)
            ));
        }
        let slack = residual.saturating_sub(*bw);
        if tightest.is_none_or(|(_, s)| slack < s) {
            tightest = Some((l, slack));
        }
    }
    Check {
        kind: CheckKind::FlowAdmission,
        requirement: format!("{} flows", bookings.len()),
        passed: problems.is_empty(),
        measured: match tightest {
            Some((l, s)) => format!("tightest slack {} on link {l}", mbps(s)),
            None => "best effort only".to_owned(),
        },
        detail: problems.join("; "),
    }
}

/// Bandwidth bookings the request's placement on `node` would make: its own
/// flows to endpoints and to already placed peers, plus flows that placed
/// peers declared towards this component and that are still waiting for it.
///
/// Fails when a flow has no path of up links.
pub fn plan_flows(
    ctx: &SchedulingContext<'_>,
    request: &DeploymentRequest,
    node: &NodeId,
) -> Result<Vec<NetworkReservation>, String> {
    let me = FlowEnd::Component {
        request: request.id.clone(),
        name: request.component.name.clone(),
    };
    let peers: Vec<&Placement> = ctx
        .view
        .running_placements()
        .filter(|p| p.tenant == request.tenant && p.request_id != request.id)
        .collect();
    let booked: BTreeSet<&FlowId> = ctx
        .view
        .running_placements()
        .flat_map(|p| p.network_reservations.iter().map(|r| &r.flow))
        .collect();
    let mut out: Vec<NetworkReservation> = Vec::new();

    let add = |source: FlowEnd,
               src_node: &NodeId,
               sink: FlowEnd,
               dst_node: &NodeId,
               rate: Bandwidth,
               class,
               counterpart: Option<crate::model::RequestId>,
               out: &mut Vec<NetworkReservation>|
     -> Result<(), String> {
        let id = flow_id(&request.tenant, &source, &sink);
        if booked.contains(&id) || out.iter().any(|r| r.flow == id) {
            return Ok(());
        }
        let path = ctx
            .topology
            .path_between_in(src_node, dst_node, &ctx.residuals)
            .map_err(|e| format!("flow {id}: {e}"))?;
        out.push(NetworkReservation {
            flow: id,
            source,
            sink,
            path,
            bandwidth: rate,
            class,
            counterpart,
        });
        Ok(())
    };

    for spec in &request.component.flows {
        let (peer, peer_node, counterpart) = match &spec.peer {
            FlowPeer::Endpoint(e) => {
                let ep = ctx
                    .topology
                    .endpoint(e)
                    .ok_or_else(|| format!("unknown endpoint {e}"))?;
                (FlowEnd::Endpoint(e.clone()), ep.attached_node.clone(), None)
            }
            FlowPeer::Component(name) => {
                match peers.iter().find(|p| p.component.name == *name) {
                    Some(p) => (
                        FlowEnd::Component {
                            request: p.request_id.clone(),
                            name: name.clone(),
                        },
                        p.node_id.clone(),
                        Some(p.request_id.clone()),
                    ),
                    // Activated when the peer is placed.
                    None => continue,
                }
            }
        };
        let class = request.traffic_class();
        match spec.direction {
            FlowDirection::Inbound => add(
                peer,
                &peer_node,
                me.clone(),
                node,
                spec.rate,
                class,
                counterpart,
                &mut out,
            )?,
            FlowDirection::Outbound => add(
                me.clone(),
                node,
                peer,
                &peer_node,
                spec.rate,
                class,
                counterpart,
                &mut out,
            )?,
        }
    }

    for p in &peers {
        let them = FlowEnd::Component {
            request: p.request_id.clone(),
            name: p.component.name.clone(),
        };
        for spec in waiting_flows(&p.component, &request.component.name) {
            let cp = Some(p.request_id.clone());
            match spec.direction {
                FlowDirection::Outbound => add(
                    them.clone(),
                    &p.node_id,
                    me.clone(),
                    node,
                    spec.rate,
                    p.traffic_class,
                    cp,
                    &mut out,
                )?,
                FlowDirection::Inbound => add(
                    me.clone(),
                    node,
                    them.clone(),
                    &p.node_id,
                    spec.rate,
                    p.traffic_class,
                    cp,
                    &mut out,
                )?,
            }
        }
    }
    Ok(out)
}

fn waiting_flows<'a>(
    component: &'a ApplicationComponent,
    peer: &'a str,
) -> impl Iterator<Item = &'a crate::model::FlowSpec> + 'a {
    component
        .flows
        .iter()
        .filter(move |f| matches!(&f.peer, FlowPeer::Component(n) if n == peer))
}

fn score(
    ctx: &SchedulingContext<'_>,
    request: &DeploymentRequest,
    node: &Node,
    bottlenecks: &[(Option<Bandwidth>, Option<Bandwidth>)],
) -> ScoredNode {
    let (profile, need) = footprint(request, ctx.config);
    let free = free_on(ctx, &node.id).saturating_sub(&need);
    let cap = node.capacity;
    let frac = |f: u64, c: u64| if c == 0 { 0.0 } else { f as f64 / c as f64 };
    let fractions = [
        frac(free.millicpus, cap.millicpus),
        frac(free.ram_mib, cap.ram_mib),
        frac(free.disk_gib, cap.disk_gib),
    ];
    let w = profile.weights();
    let capacity_fit = w[0] * fractions[0] + w[1] * fractions[1] + w[2] * fractions[2];

    let network_slack = if bottlenecks.is_empty() {
        1.0
    } else {
        let total: f64 = bottlenecks
            .iter()
            .map(|(min, bottleneck)| slack(*min, *bottleneck))
            .sum();
        total / bottlenecks.len() as f64
    };
    let tier = tier_preference(node.tier);
    let wt = ctx.config.weights;
    ScoredNode {
        node: node.id.clone(),
        score: wt.capacity * capacity_fit + wt.network * network_slack + wt.tier * tier,
        subscores: Subscores {
            capacity_fit,
            network_slack,
            tier_preference: tier,
        },
    }
}

fn slack(min: Option<Bandwidth>, bottleneck: Option<Bandwidth>) -> f64 {
    match (min, bottleneck) {
        (_, None) => 0.0,
        (None, _) => 1.0,
        (Some(m), Some(b)) if m == Bandwidth::ZERO || b.is_infinite() => 1.0,
        (Some(m), Some(b)) => (b.bps() as f64 / (2.0 * m.bps() as f64)).min(1.0),
    }
}

/// One verdict per hostable node, in node-id order.
pub fn feasible_nodes(
    ctx: &SchedulingContext<'_>,
    request: &DeploymentRequest,
) -> Vec<FilterVerdict> {
    rank(ctx, request, Execution::Sequential)
        .into_iter()
        .map(|e| e.verdict)
        .collect()
}

/// Scores `node` for `request`, assuming it passed filtering.
pub fn priority(
    ctx: &SchedulingContext<'_>,
    request: &DeploymentRequest,
    node: &NodeId,
) -> Option<ScoredNode> {
    let node = ctx.topology.node(node)?;
    let bottlenecks: Vec<_> = request
        .network_requirements()
        .map(|(profile, ep)| {
            (
                ctx.config.thresholds[profile].min_bandwidth,
                path_to_endpoint(ctx, &node.id, ep).map(|m| m.bottleneck),
            )
        })
        .collect();
    Some(score(ctx, request, node, &bottlenecks))
}

/// Highest score; ties go to the smallest node id.
pub fn choose(scored: &[ScoredNode]) -> Option<&ScoredNode> {
    scored.iter().reduce(|best, s| {
        if s.score > best.score || (s.score == best.score && s.node < best.node) {
            s
        } else {
            best
        }
    })
}

/// Evaluates every hostable node, in node-id order.
pub fn rank(
    ctx: &SchedulingContext<'_>,
    request: &DeploymentRequest,
    execution: Execution,
) -> Vec<NodeEvaluation> {
    let nodes: Vec<&Node> = ctx.topology.hostable_nodes().collect();
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            nodes
                .par_iter()
                .map(|n| evaluate(ctx, request, n))
                .collect()
        }
        _ => nodes.iter().map(|n| evaluate(ctx, request, n)).collect(),
    }
}

/// Commits a held reservation, records the placement and starts its flows.
pub fn schedule(
    inventory: &mut Inventory,
    flows: &mut FlowSim,
    request: &DeploymentRequest,
    reservation: ReservationId,
    now: SimTime,
) -> Result<Placement, InventoryError> {
    let draft = Placement {
        request_id: request.id.clone(),
        tenant: request.tenant.clone(),
        component: request.component.clone(),
        traffic_class: request.traffic_class(),
        node_id: NodeId::new(""),
        allocated: ResourceVector::ZERO,
        network_reservations: Vec::new(),
        state: PlacementState::Running,
    };
    inventory.commit(reservation, draft, now)?;
    let placement = inventory
        .state()
        .placement(&request.id)
        .cloned()
        .expect("committed placement is recorded");
    for nr in &placement.network_reservations {
        flows.activate_flow(nr, &request.id);
    }
    Ok(placement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{request, system};

    fn scored(node: &str, score: f64) -> ScoredNode {
        ScoredNode {
            node: node.into(),
            score,
            subscores: Subscores {
                capacity_fit: 0.0,
                network_slack: 0.0,
                tier_preference: 0.0,
            },
        }
    }

    fn passing(ctx: &SchedulingContext<'_>, req: &DeploymentRequest) -> Vec<String> {
        feasible_nodes(ctx, req)
            .into_iter()
            .filter(|v| v.passed)
            .map(|v| v.node.to_string())
            .collect()
    }

    #[test]
    fn choose_argmax_and_ties() {
        assert_eq!(
            choose(&[scored("a", 0.5), scored("b", 0.7)])
                .unwrap()
                .node
                .as_str(),
            "b"
        );
        assert_eq!(
            choose(&[scored("b", 0.5), scored("a", 0.5)])
                .unwrap()
                .node
                .as_str(),
            "a"
        );
        assert_eq!(choose(&[scored("z", 0.1)]).unwrap().node.as_str(), "z");
        assert!(choose(&[]).is_none());
    }

    #[test]
    fn location_filters_to_cloudlet() {
        let sys = system();
        let view = sys.snapshot();
        let ctx = sys.context(&view);
        let req =
            request("{component: anonymizer, requirements: [{location: {region: region-A}}]}");
        assert_eq!(passing(&ctx, &req), ["cloudlet"]);
        let cloud = feasible_nodes(&ctx, &req).remove(0);
        assert_eq!(cloud.node.as_str(), "cloud");
        assert_eq!(cloud.failures().next().unwrap().kind, CheckKind::Location);
    }

    #[test]
    fn requirement_free_request_passes_everywhere() {
        let sys = system();
        let view = sys.snapshot();
        let ctx = sys.context(&view);
        let req = request("{component: c}");
        assert_eq!(passing(&ctx, &req), ["cloud", "cloudlet", "gateway"]);
        let best = rank(&ctx, &req, Execution::Sequential)
            .into_iter()
            .filter_map(|e| e.scored)
            .collect::<Vec<_>>();
        assert_eq!(choose(&best).unwrap().node.as_str(), "cloud");
    }

    #[test]
    fn video_profile_rules_out_the_cloud() {
        let sys = system();
        let view = sys.snapshot();
        let ctx = sys.context(&view);
        let req = request(
            "{component: fd, requirements: [{network: {profile: SignalingAndVideoStreaming, endpoint: camera-1}}]}",
        );
        let verdicts = feasible_nodes(&ctx, &req);
        assert!(!verdicts[0].passed);
        assert!(verdicts[0].checks[1]
            .detail
            .contains("insufficient bandwidth"));
        let scores: Vec<_> = rank(&ctx, &req, Execution::Sequential)
            .into_iter()
            .filter_map(|e| e.scored)
            .collect();
        assert_eq!(choose(&scores).unwrap().node.as_str(), "cloudlet");
    }

    #[test]
    fn unreachable_endpoint_fails_even_best_effort() {
        let mut sys = system();
        sys.set_link_state(&"lan".into(), crate::topology::LinkStatus::Down)
            .unwrap();
        let view = sys.snapshot();
        let ctx = sys.context(&view);
        let req = request("{component: c, requirements: [{network: {endpoint: camera-1}}]}");
        let v = feasible_nodes(&ctx, &req);
        assert_eq!(passing(&ctx, &req), ["gateway"]);
        assert_eq!(v[0].checks[1].measured, "unreachable");
    }

    #[test]
    fn full_gateway_scores_point_three_nine() {
        let sys = system();
        let view = sys.snapshot();
        let ctx = sys.context(&view);
        let req = request(
            "{component: c, requirements: [{compute: {vcpus: 4, ram_mib: 1024, disk_gib: 16}}]}",
        );
        let s = priority(&ctx, &req, &"gateway".into()).unwrap();
        assert_eq!(s.subscores.capacity_fit, 0.0);
        assert!((s.score - 0.39).abs() < 1e-12, "{}", s.score);
    }

    #[test]
    fn identical_nodes_tie() {
        let topo = Topology::from_yaml(
            r#"
nodes:
  - {id: b, tier: EdgeCloudlet, region: r, vcpus: 4, ram_mib: 4096, disk_gib: 10}
  - {id: a, tier: EdgeCloudlet, region: r, vcpus: 4, ram_mib: 4096, disk_gib: 10}
links:
  - {id: ab, a: a, b: b, bandwidth_mbps: 10, latency_ms: 1}
"#,
        )
        .unwrap();
        let sys = crate::orchestrator::Orchestrator::new(topo, EngineConfig::default());
        let view = sys.snapshot();
        let ctx = sys.context(&view);
        let req = request("{component: c}");
        let scores: Vec<_> = rank(&ctx, &req, Execution::Sequential)
            .into_iter()
            .filter_map(|e| e.scored)
            .collect();
        assert_eq!(scores[0].score, scores[1].score);
        assert_eq!(choose(&scores).unwrap().node.as_str(), "a");
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let sys = system();
        let view = sys.snapshot();
        let ctx = sys.context(&view);
        let req = request(
            "{component: {name: c, flows: [{from: {endpoint: camera-1}, rate_mbps: 3}]}, requirements: [{network: {profile: InteractiveApplication, endpoint: camera-1}}]}",
        );
        assert_eq!(
            rank(&ctx, &req, Execution::Sequential),
            rank(&ctx, &req, Execution::Parallel)
        );
    }

    #[test]
    fn flows_book_along_paths() {
        let sys = system();
        let view = sys.snapshot();
        let ctx = sys.context(&view);
        let req = request(
            "{component: {name: c, flows: [{from: {endpoint: camera-1}, rate_mbps: 4}, {to: {component: later}, rate_mbps: 1}]}}",
        );
        let plan = plan_flows(&ctx, &req, &"cloud".into()).unwrap();
        assert_eq!(plan.len(), 1, "flows to unplaced peers wait");
        assert_eq!(plan[0].flow.as_str(), "default/camera-1->c");
        assert_eq!(plan[0].path.links, [LinkId::new("lan"), LinkId::new("wan")]);
        assert_eq!(plan[0].path.source().as_str(), "gateway");
        assert_eq!(plan[0].class, crate::model::TrafficClass::BestEffort);
    }

    #[test]
    fn guaranteed_flows_need_residual() {
        let sys = system();
        let view = sys.snapshot();
        let ctx = sys.context(&view);
        let req = request(
            "{component: {name: c, flows: [{from: {endpoint: camera-1}, rate_mbps: 3}]}, requirements: [{network: {profile: InteractiveApplication, endpoint: camera-1}}]}",
        );
        let v = feasible_nodes(&ctx, &req);
        let cloud = &v[0];
        assert!(!cloud.passed);
        let flow = cloud
            .checks
            .iter()
            .find(|c| c.kind == CheckKind::FlowAdmission)
            .unwrap();
        assert!(!flow.passed);
        assert!(flow.detail.contains("link wan"), "{}", flow.detail);
        assert!(v[1].passed && v[2].passed);
    }
}
