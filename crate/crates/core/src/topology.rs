//! Infrastructure graph: nodes, links, endpoints and regions, plus path
//! selection and path metrics.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::model::{
    Bandwidth, EndpointId, LinkId, NodeId, ReferenceCatalog, RegionId, ResourceVector, Tier,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub tier: Tier,
    pub capacity: ResourceVector,
    pub region: RegionId,
    pub labels: BTreeSet<String>,
    /// Local buffer available to components on this node while their
    /// outbound links are down. Zero disables caching.
    pub cache_mib: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkStatus {
    #[default]
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub a: NodeId,
    pub b: NodeId,
    pub bandwidth: Bandwidth,
    /// One-way latency in milliseconds.
    pub latency_ms: f64,
    pub jitter_ms: f64,
    pub status: LinkStatus,
}

impl Link {
    pub fn is_up(&self) -> bool {
        self.status == LinkStatus::Up
    }

    pub fn other_end(&self, n: &NodeId) -> &NodeId {
        if *n == self.a {
            &self.b
        } else {
            &self.a
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    pub id: EndpointId,
    pub attached_node: NodeId,
    pub kind: String,
}

/// A simple path: `nodes[i]` and `nodes[i + 1]` are joined by `links[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Path {
    pub links: Vec<LinkId>,
    pub nodes: Vec<NodeId>,
}

impl Path {
    pub fn empty(at: NodeId) -> Self {
        Path {
            links: Vec::new(),
            nodes: vec![at],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn hops(&self) -> usize {
        self.links.len()
    }

    pub fn source(&self) -> &NodeId {
        &self.nodes[0]
    }

    pub fn destination(&self) -> &NodeId {
        self.nodes.last().expect("a path has at least one node")
    }

    pub fn reversed(&self) -> Path {
        Path {
            links: self.links.iter().rev().cloned().collect(),
            nodes: self.nodes.iter().rev().cloned().collect(),
        }
    }
}

/// Aggregate quality of a path: bottleneck residual bandwidth, summed latency
/// and jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathMetrics {
    pub bottleneck: Bandwidth,
    pub latency_ms: f64,
    pub jitter_ms: f64,
    pub hops: usize,
}

/// Residual bandwidth of every link of one topology, in link-id order.
/// Built by [`Topology::link_table`] and only meaningful for that topology.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTable(Vec<Bandwidth>);

/// Emitted when a link changes state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkStateChanged {
    pub link: LinkId,
    pub status: LinkStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TopologyError {
    #[error("topology has no nodes")]
    Empty,
    #[error("duplicate {kind} id `{id}`")]
    Duplicate { kind: &'static str, id: String },
    #[error("link `{link}` references missing node `{node}`")]
    Dangling { link: String, node: String },
    #[error("endpoint `{endpoint}` is attached to missing node `{node}`")]
    DanglingEndpoint { endpoint: String, node: String },
    #[error("link `{0}` connects a node to itself")]
    SelfLoop(String),
    #[error("link `{link}`: {reason}")]
    InvalidLink { link: String, reason: String },
    #[error("node `{node}`: {reason}")]
    InvalidNode { node: String, reason: String },
    #[error("node `{0}` is in the swarm-of-things tier and must have zero capacity")]
    SwarmCapacity(String),
    #[error("topology is disconnected: `{0}` is unreachable")]
    Disconnected(String),
    #[error("unknown link `{0}`")]
    UnknownLink(String),
    #[error("cannot read topology: {0}")]
    Io(String),
    #[error("cannot parse topology: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PathError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("no path of up links from `{from}` to `{to}`")]
    Unreachable { from: NodeId, to: NodeId },
}

/// Topology file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    pub nodes: Vec<NodeDoc>,
    #[serde(default)]
    pub links: Vec<LinkDoc>,
    #[serde(default)]
    pub endpoints: Vec<EndpointDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: String,
    pub tier: Tier,
    pub region: String,
    #[serde(default)]
    pub vcpus: f64,
    #[serde(default)]
    pub ram_mib: u64,
    #[serde(default)]
    pub disk_gib: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub cache_mib: u64,
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

fn is_up(s: &LinkStatus) -> bool {
    *s == LinkStatus::Up
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub id: String,
    pub a: String,
    pub b: String,
    pub bandwidth_mbps: f64,
    #[serde(default)]
    pub latency_ms: f64,
    #[serde(default)]
    pub jitter_ms: f64,
    #[serde(default, skip_serializing_if = "is_up")]
    pub state: LinkStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointDoc {
    pub id: String,
    pub node: String,
    #[serde(default)]
    pub kind: String,
}

/// The validated infrastructure graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: BTreeMap<NodeId, Node>,
    links: BTreeMap<LinkId, Link>,
    endpoints: BTreeMap<EndpointId, Endpoint>,
    graph: Graph,
}

/// Dense index of the graph for path search. Node and link indices follow id
/// order, so comparing link indices compares link ids.
#[derive(Debug, Clone, PartialEq)]
struct Graph {
    nodes: Vec<NodeId>,
    links: Vec<LinkId>,
    /// Per node: (link, neighbour) for every incident link, by link index.
    adj: Vec<Vec<(usize, usize)>>,
    up: Vec<bool>,
}

impl Graph {
    fn build(nodes: &BTreeMap<NodeId, Node>, links: &BTreeMap<LinkId, Link>) -> Graph {
        let node_ids: Vec<NodeId> = nodes.keys().cloned().collect();
        let index = |n: &NodeId| node_ids.binary_search(n).expect("validated link end");
        let mut adj = vec![Vec::new(); node_ids.len()];
        for (li, l) in links.values().enumerate() {
            let (a, b) = (index(&l.a), index(&l.b));
            adj[a].push((li, b));
            adj[b].push((li, a));
        }
        Graph {
            up: links.values().map(Link::is_up).collect(),
            links: links.keys().cloned().collect(),
            adj,
            nodes: node_ids,
        }
    }

    fn node(&self, id: &NodeId) -> Option<usize> {
        self.nodes.binary_search(id).ok()
    }

    fn up_steps(&self, n: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj[n].iter().copied().filter(|&(l, _)| self.up[l])
    }
}

/// Builds a topology from its document form.
pub fn load_topology(doc: &TopologyDoc) -> Result<Topology, TopologyError> {
    Topology::from_doc(doc)
}

impl Topology {
    pub fn from_doc(doc: &TopologyDoc) -> Result<Topology, TopologyError> {
        if doc.nodes.is_empty() {
            return Err(TopologyError::Empty);
        }
        let mut nodes = BTreeMap::new();
        for n in &doc.nodes {
            if n.id.is_empty() {
                return Err(TopologyError::InvalidNode {
                    node: n.id.clone(),
                    reason: "empty id".into(),
                });
            }
            let capacity =
                ResourceVector::from_vcpus(n.vcpus, n.ram_mib, n.disk_gib).ok_or_else(|| {
                    TopologyError::InvalidNode {
                        node: n.id.clone(),
                        reason: format!("invalid vcpus {}", n.vcpus),
                    }
                })?;
            if n.tier == Tier::SwarmOfThings && !capacity.is_zero() {
                return Err(TopologyError::SwarmCapacity(n.id.clone()));
            }
            let node = Node {
                id: NodeId::new(n.id.clone()),
                tier: n.tier,
                capacity,
                region: RegionId::new(n.region.clone()),
                labels: n.labels.iter().cloned().collect(),
                cache_mib: n.cache_mib,
            };
            if nodes.insert(node.id.clone(), node).is_some() {
                return Err(TopologyError::Duplicate {
                    kind: "node",
                    id: n.id.clone(),
                });
            }
        }

        let mut links = BTreeMap::new();
        for l in &doc.links {
            for end in [&l.a, &l.b] {
                if !nodes.contains_key(end.as_str()) {
                    return Err(TopologyError::Dangling {
                        link: l.id.clone(),
                        node: end.clone(),
                    });
                }
            }
            if l.a == l.b {
                return Err(TopologyError::SelfLoop(l.id.clone()));
            }
            let invalid = |reason: &str| TopologyError::InvalidLink {
                link: l.id.clone(),
                reason: reason.to_owned(),
            };
            let bandwidth = Bandwidth::from_mbps(l.bandwidth_mbps)
                .filter(|b| b.bps() > 0)
                .ok_or_else(|| invalid("bandwidth must be positive"))?;
            if !(l.latency_ms.is_finite() && l.latency_ms >= 0.0) {
                return Err(invalid("latency must be non-negative"));
            }
            if !(l.jitter_ms.is_finite() && l.jitter_ms >= 0.0) {
                return Err(invalid("jitter must be non-negative"));
            }
            let link = Link {
                id: LinkId::new(l.id.clone()),
                a: NodeId::new(l.a.clone()),
                b: NodeId::new(l.b.clone()),
                bandwidth,
                latency_ms: l.latency_ms,
                jitter_ms: l.jitter_ms,
                status: l.state,
            };
            if links.insert(link.id.clone(), link).is_some() {
                return Err(TopologyError::Duplicate {
                    kind: "link",
                    id: l.id.clone(),
                });
            }
        }

        let mut endpoints = BTreeMap::new();
        for e in &doc.endpoints {
            if !nodes.contains_key(e.node.as_str()) {
                return Err(TopologyError::DanglingEndpoint {
                    endpoint: e.id.clone(),
                    node: e.node.clone(),
                });
            }
            let ep = Endpoint {
                id: EndpointId::new(e.id.clone()),
                attached_node: NodeId::new(e.node.clone()),
                kind: e.kind.clone(),
            };
            if endpoints.insert(ep.id.clone(), ep).is_some() {
                return Err(TopologyError::Duplicate {
                    kind: "endpoint",
                    id: e.id.clone(),
                });
            }
        }

        let graph = Graph::build(&nodes, &links);
        let topo = Topology {
            nodes,
            links,
            endpoints,
            graph,
        };
        topo.check_connected()?;
        Ok(topo)
    }

    pub fn from_yaml(text: &str) -> Result<Topology, TopologyError> {
        let doc: TopologyDoc =
            serde_yaml::from_str(text).map_err(|e| TopologyError::Parse(e.to_string()))?;
        Topology::from_doc(&doc)
    }

    pub fn load_file(path: &FsPath) -> Result<Topology, TopologyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TopologyError::Io(format!("{}: {e}", path.display())))?;
        Topology::from_yaml(&text)
    }

    /// Connectivity is judged with every link considered up.
    fn check_connected(&self) -> Result<(), TopologyError> {
        let g = &self.graph;
        let mut seen = vec![false; g.nodes.len()];
        seen[0] = true;
        let mut queue = VecDeque::from([0]);
        while let Some(n) = queue.pop_front() {
            for &(_, other) in &g.adj[n] {
                if !seen[other] {
                    seen[other] = true;
                    queue.push_back(other);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(missing) => Err(TopologyError::Disconnected(g.nodes[missing].to_string())),
            None => Ok(()),
        }
    }

    pub fn to_doc(&self) -> TopologyDoc {
        TopologyDoc {
            nodes: self
                .nodes
                .values()
                .map(|n| NodeDoc {
                    id: n.id.to_string(),
                    tier: n.tier,
                    region: n.region.to_string(),
                    vcpus: n.capacity.vcpus(),
                    ram_mib: n.capacity.ram_mib,
                    disk_gib: n.capacity.disk_gib,
                    labels: n.labels.iter().cloned().collect(),
                    cache_mib: n.cache_mib,
                })
                .collect(),
            links: self
                .links
                .values()
                .map(|l| LinkDoc {
                    id: l.id.to_string(),
                    a: l.a.to_string(),
                    b: l.b.to_string(),
                    bandwidth_mbps: l.bandwidth.mbps(),
                    latency_ms: l.latency_ms,
                    jitter_ms: l.jitter_ms,
                    state: l.status,
                })
                .collect(),
            endpoints: self
                .endpoints
                .values()
                .map(|e| EndpointDoc {
                    id: e.id.to_string(),
                    node: e.attached_node.to_string(),
                    kind: e.kind.clone(),
                })
                .collect(),
        }
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    /// Nodes that may host components, in id order.
    pub fn hostable_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(|n| n.tier.hosts_workloads())
    }

    pub fn link(&self, id: &LinkId) -> Option<&Link> {
        self.links.get(id)
    }

    pub fn links(&self) -> impl Iterator<Item = &Link> {
        self.links.values()
    }

    pub fn endpoint(&self, id: &EndpointId) -> Option<&Endpoint> {
        self.endpoints.get(id)
    }

    pub fn endpoints(&self) -> impl Iterator<Item = &Endpoint> {
        self.endpoints.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    /// Evaluates `f` once per link, for repeated path searches under the
    /// same weights.
    pub fn link_table<F: Fn(&LinkId) -> Bandwidth>(&self, f: F) -> LinkTable {
        LinkTable(self.graph.links.iter().map(f).collect())
    }

    /// Sets a link's state. Returns the change event, or `None` when the link
    /// was already in the requested state.
    pub fn set_link_state(
        &mut self,
        link: &LinkId,
        status: LinkStatus,
    ) -> Result<Option<LinkStateChanged>, TopologyError> {
        let l = self
            .links
            .get_mut(link)
            .ok_or_else(|| TopologyError::UnknownLink(link.to_string()))?;
        if l.status == status {
            return Ok(None);
        }
        l.status = status;
        let li = self.graph.links.binary_search(link).expect("indexed link");
        self.graph.up[li] = status == LinkStatus::Up;
        Ok(Some(LinkStateChanged {
            link: link.clone(),
            status,
        }))
    }

    /// Selects the path between `a` and `b` over up links.
    ///
    /// Ordering: fewest hops, then largest bottleneck residual bandwidth, then
    /// lexicographically smallest link-id sequence. The sequence is compared
    /// as traversed from the smaller of the two node ids, so the result for
    /// `(b, a)` is exactly the reverse of the result for `(a, b)`.
    pub fn path_between<F>(&self, a: &NodeId, b: &NodeId, residual: F) -> Result<Path, PathError>
    where
        F: Fn(&LinkId) -> Bandwidth,
    {
        self.search(a, b, |l| residual(&self.graph.links[l]))
    }

    /// [`Topology::path_between`] with residuals from a precomputed table.
    pub fn path_between_in(
        &self,
        a: &NodeId,
        b: &NodeId,
        residuals: &LinkTable,
    ) -> Result<Path, PathError> {
        self.search(a, b, |l| residuals.0[l])
    }

    fn search(
        &self,
        a: &NodeId,
        b: &NodeId,
        res: impl Fn(usize) -> Bandwidth,
    ) -> Result<Path, PathError> {
        for n in [a, b] {
            if !self.nodes.contains_key(n) {
                return Err(PathError::UnknownNode(n.clone()));
            }
        }
        if a == b {
            return Ok(Path::empty(a.clone()));
        }
        let g = &self.graph;
        let flip = a > b;
        let (src, dst) = if flip { (b, a) } else { (a, b) };
        let (src, dst) = (g.node(src).unwrap(), g.node(dst).unwrap());

        // Hop distance to dst over up links, with nodes in BFS order. The
        // search stops once every node as close as src has been labelled.
        let mut dist = vec![usize::MAX; g.nodes.len()];
        dist[dst] = 0;
        let mut order = vec![dst];
        let mut head = 0;
        while head < order.len() {
            let n = order[head];
            head += 1;
            if dist[src] != usize::MAX && dist[n] >= dist[src] {
                break;
            }
            for (_, other) in g.up_steps(n) {
                if dist[other] == usize::MAX {
                    dist[other] = dist[n] + 1;
                    order.push(other);
                }
            }
        }
        if dist[src] == usize::MAX {
            return Err(PathError::Unreachable {
                from: a.clone(),
                to: b.clone(),
            });
        }
        let src_dist = dist[src];
        let dist = &dist;
        // Steps from n to a neighbour one hop closer to dst.
        let closer = |n: usize| {
            let d = dist[n];
            g.up_steps(n)
                .filter(move |&(_, o)| dist[o] != usize::MAX && dist[o] + 1 == d)
        };

        // Best bottleneck from each node to dst along shortest paths.
        let mut best = vec![Bandwidth::ZERO; g.nodes.len()];
        best[dst] = Bandwidth::INFINITE;
        for &n in order.iter().skip(1) {
            if dist[n] > src_dist {
                break;
            }
            best[n] = closer(n)
                .map(|(l, o)| res(l).min(best[o]))
                .max()
                .expect("a node at distance d > 0 has a neighbour at d - 1");
        }

        let target = best[src];
        let mut links = Vec::with_capacity(src_dist);
        let mut nodes = Vec::with_capacity(src_dist + 1);
        let mut cur = src;
        nodes.push(g.nodes[cur].clone());
        while cur != dst {
            let (l, next) = closer(cur)
                .filter(|&(l, o)| res(l).min(best[o]) >= target)
                .min()
                .expect("the best bottleneck is achievable");
            links.push(g.links[l].clone());
            nodes.push(g.nodes[next].clone());
            cur = next;
        }
        let path = Path { links, nodes };
        Ok(if flip { path.reversed() } else { path })
    }

    /// Aggregates a path: min residual bandwidth, summed latency and jitter.
    pub fn path_metrics<F>(&self, path: &Path, residual: F) -> PathMetrics
    where
        F: Fn(&LinkId) -> Bandwidth,
    {
        let mut m = PathMetrics {
            bottleneck: Bandwidth::INFINITE,
            latency_ms: 0.0,
            jitter_ms: 0.0,
            hops: path.hops(),
        };
        for lid in &path.links {
            let link = &self.links[lid];
            m.bottleneck = m.bottleneck.min(residual(lid));
            m.latency_ms += link.latency_ms;
            m.jitter_ms += link.jitter_ms;
        }
        m
    }
}

impl ReferenceCatalog for Topology {
    fn has_endpoint(&self, id: &str) -> bool {
        self.endpoints.contains_key(id)
    }

    fn has_region(&self, id: &str) -> bool {
        self.nodes.values().any(|n| n.region.as_str() == id)
    }
}
