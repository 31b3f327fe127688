//! Constant-rate flow simulation over the topology.
//!
//! Volumes are tracked in millibits (bit/s times ms), so every counter is an
//! exact integer and `sourced == delivered + cached + lost` holds exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{
    Bandwidth, FlowEnd, FlowId, LinkId, Millibits, NetworkReservation, NodeId, RequestId, SimTime,
    TrafficClass,
};
use crate::topology::{LinkStateChanged, LinkStatus, Path, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlowState {
    Active,
    /// A path link is down and the source node buffers the stream.
    Caching,
    /// A path link is down and nothing buffers the stream.
    Stalled,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowCounters {
    pub sourced: Millibits,
    pub delivered: Millibits,
    /// Currently buffered, not yet delivered.
    pub cached: Millibits,
    pub lost: Millibits,
}

impl FlowCounters {
    pub fn is_conserved(&self) -> bool {
        self.sourced == self.delivered + self.cached + self.lost
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub id: FlowId,
    pub source: FlowEnd,
    pub sink: FlowEnd,
    /// The placement whose reservation books this flow.
    pub owner: RequestId,
    pub rate: Bandwidth,
    pub class: TrafficClass,
    pub path: Path,
    pub state: FlowState,
    pub cache_node: Option<NodeId>,
    pub counters: FlowCounters,
    pub cached_peak: Millibits,
    /// Extra rate at which buffered data is currently being delivered.
    pub drain_rate: Bandwidth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheState {
    pub node: NodeId,
    pub capacity: Millibits,
    pub occupied: Millibits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SimLink {
    capacity: Bandwidth,
    up: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSim {
    now: SimTime,
    drain_multiplier: f64,
    links: BTreeMap<LinkId, SimLink>,
    caches: BTreeMap<NodeId, CacheState>,
    flows: BTreeMap<FlowId, Flow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub capacity_mbps: f64,
    pub up: bool,
    pub reserved_mbps: f64,
    pub offered_mbps: f64,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMetrics {
    pub state: FlowState,
    pub rate_mbps: f64,
    pub links: Vec<LinkId>,
    pub bytes_sourced: f64,
    pub bytes_delivered: f64,
    pub bytes_cached: f64,
    pub bytes_lost: f64,
    pub bytes_cached_peak: f64,
    pub drain_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheMetrics {
    pub capacity_mib: f64,
    pub occupied_mib: f64,
    /// Buffered bytes per flow.
    pub flows: BTreeMap<FlowId, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub time_s: f64,
    pub links: BTreeMap<LinkId, LinkMetrics>,
    pub flows: BTreeMap<FlowId, FlowMetrics>,
    pub caches: BTreeMap<NodeId, CacheMetrics>,
}

const MIB_BYTES: f64 = 1024.0 * 1024.0;

impl FlowSim {
    pub fn new(topology: &Topology, drain_multiplier: f64) -> FlowSim {
        FlowSim {
            now: SimTime::ZERO,
            drain_multiplier,
            links: topology
                .links()
                .map(|l| {
                    (
                        l.id.clone(),
                        SimLink {
                            capacity: l.bandwidth,
                            up: l.status == LinkStatus::Up,
                        },
                    )
                })
                .collect(),
            caches: topology
                .nodes()
                .filter(|n| n.cache_mib > 0)
                .map(|n| {
                    (
                        n.id.clone(),
                        CacheState {
                            node: n.id.clone(),
                            capacity: Millibits::from_mib(n.cache_mib),
                            occupied: Millibits::default(),
                        },
                    )
                })
                .collect(),
            flows: BTreeMap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn flow(&self, id: &FlowId) -> Option<&Flow> {
        self.flows.get(id)
    }

    pub fn flows(&self) -> impl Iterator<Item = &Flow> {
        self.flows.values()
    }

    pub fn cache(&self, node: &NodeId) -> Option<&CacheState> {
        self.caches.get(node)
    }

    /// Starts a booked flow. A flow whose path is already broken starts
    /// caching or stalled.
    pub fn activate_flow(&mut self, booking: &NetworkReservation, owner: &RequestId) -> &Flow {
        let cache_node = match booking.source {
            FlowEnd::Component { .. } => Some(booking.path.source())
                .filter(|n| self.caches.contains_key(*n))
                .cloned(),
            FlowEnd::Endpoint(_) => None,
        };
        let mut flow = Flow {
            id: booking.flow.clone(),
            source: booking.source.clone(),
            sink: booking.sink.clone(),
            owner: owner.clone(),
            rate: booking.bandwidth,
            class: booking.class,
            path: booking.path.clone(),
            state: FlowState::Active,
            cache_node,
            counters: FlowCounters::default(),
            cached_peak: Millibits::default(),
            drain_rate: Bandwidth::ZERO,
        };
        flow.state = self.state_for(&flow);
        if let Some(old) = self.flows.insert(flow.id.clone(), flow) {
            self.release_buffer(&old);
        }
        self.assign_drains();
        &self.flows[&booking.flow]
    }

    /// Removes every flow that starts or ends at `request`'s placement.
    /// Buffered data is discarded.
    pub fn remove_flows_of(&mut self, request: &RequestId) -> Vec<FlowId> {
        let gone: Vec<FlowId> = self
            .flows
            .values()
            .filter(|f| {
                f.owner == *request
                    || f.source.request() == Some(request)
                    || f.sink.request() == Some(request)
            })
            .map(|f| f.id.clone())
            .collect();
        for id in &gone {
            let f = self.flows.remove(id).unwrap();
            self.release_buffer(&f);
        }
        self.assign_drains();
        gone
    }

    fn release_buffer(&mut self, flow: &Flow) {
        if let Some(c) = flow
            .cache_node
            .as_ref()
            .and_then(|n| self.caches.get_mut(n))
        {
            c.occupied = c.occupied.saturating_sub(flow.counters.cached);
        }
    }

    fn state_for(&self, flow: &Flow) -> FlowState {
        let broken = flow
            .path
            .links
            .iter()
            .any(|l| !self.links.get(l).is_some_and(|s| s.up));
        match (broken, &flow.cache_node) {
            (false, _) => FlowState::Active,
            (true, Some(_)) => FlowState::Caching,
            (true, None) => FlowState::Stalled,
        }
    }

    pub fn on_link_state_changed(&mut self, event: &LinkStateChanged) {
        let Some(link) = self.links.get_mut(&event.link) else {
            return;
        };
        link.up = event.status == LinkStatus::Up;
        let ids: Vec<FlowId> = self
            .flows
            .values()
            .filter(|f| f.path.links.contains(&event.link))
            .map(|f| f.id.clone())
            .collect();
        for id in ids {
            let state = self.state_for(&self.flows[&id]);
            self.flows.get_mut(&id).unwrap().state = state;
        }
        self.assign_drains();
    }

    /// Live offered load per link from active flows, excluding drains.
    fn live_load(&self) -> BTreeMap<&LinkId, Bandwidth> {
        let mut load: BTreeMap<&LinkId, Bandwidth> = BTreeMap::new();
        for f in self.flows.values().filter(|f| f.state == FlowState::Active) {
            for l in &f.path.links {
                *load.entry(l).or_default() += f.rate;
            }
        }
        load
    }

    /// Gives each draining flow, in flow-id order, `min(multiplier * rate,
    /// residual path bandwidth)`, where the residual accounts for live load
    /// and the drains already assigned.
    fn assign_drains(&mut self) {
        let mut used: BTreeMap<LinkId, Bandwidth> = self
            .live_load()
            .into_iter()
            .map(|(l, b)| (l.clone(), b))
            .collect();
        let mult = self.drain_multiplier;
        let links = &self.links;
        for f in self.flows.values_mut() {
            f.drain_rate = Bandwidth::ZERO;
            if f.state != FlowState::Active || f.counters.cached == Millibits::default() {
                continue;
            }
            let want = Bandwidth::from_bps((f.rate.bps() as f64 * mult).floor() as u64);
            let residual = f
                .path
                .links
                .iter()
                .map(|l| {
                    links[l]
                        .capacity
                        .saturating_sub(used.get(l).copied().unwrap_or_default())
                })
                .min()
                .unwrap_or(Bandwidth::INFINITE);
            f.drain_rate = want.min(residual);
            for l in &f.path.links {
                let u = used.entry(l.clone()).or_default();
                *u = u.saturating_add(f.drain_rate);
            }
        }
    }

    /// Advances simulated time by `dt_ms`.
    pub fn advance(&mut self, dt_ms: u64) {
        if dt_ms == 0 {
            return;
        }
        self.assign_drains();
        for f in self.flows.values_mut() {
            let amount = Millibits::of(f.rate, dt_ms);
            f.counters.sourced += amount;
            match f.state {
                FlowState::Active => {
                    f.counters.delivered += amount;
                    if f.drain_rate > Bandwidth::ZERO {
                        let drained = Millibits::of(f.drain_rate, dt_ms).min(f.counters.cached);
                        f.counters.cached = f.counters.cached.saturating_sub(drained);
                        f.counters.delivered += drained;
                        if let Some(c) = f.cache_node.as_ref().and_then(|n| self.caches.get_mut(n))
                        {
                            c.occupied = c.occupied.saturating_sub(drained);
                        }
                    }
                }
                FlowState::Caching => {
                    let cache = f
                        .cache_node
                        .as_ref()
                        .and_then(|n| self.caches.get_mut(n))
                        .expect("caching flows have a cache");
                    let stored = amount.min(cache.capacity.saturating_sub(cache.occupied));
                    cache.occupied += stored;
                    f.counters.cached += stored;
                    f.counters.lost += amount.saturating_sub(stored);
                    f.cached_peak = f.cached_peak.max(f.counters.cached);
                }
                FlowState::Stalled => f.counters.lost += amount,
            }
        }
        self.now = self.now.plus_millis(dt_ms);
        self.assign_drains();
    }

    pub fn report(&self) -> MetricsReport {
        let mut reserved: BTreeMap<&LinkId, Bandwidth> = BTreeMap::new();
        let mut offered: BTreeMap<&LinkId, Bandwidth> = BTreeMap::new();
        for f in self.flows.values() {
            for l in &f.path.links {
                if f.class == TrafficClass::Guaranteed {
                    *reserved.entry(l).or_default() += f.rate;
                }
                let load = if f.state == FlowState::Active {
                    f.rate.saturating_add(f.drain_rate)
                } else {
                    Bandwidth::ZERO
                };
                *offered.entry(l).or_default() += load;
            }
        }
        let links = self
            .links
            .iter()
            .map(|(id, l)| {
                let off = offered.get(id).copied().unwrap_or_default();
                let utilization = if l.capacity == Bandwidth::ZERO {
                    0.0
                } else {
                    off.bps() as f64 / l.capacity.bps() as f64
                };
                (
                    id.clone(),
                    LinkMetrics {
                        capacity_mbps: l.capacity.mbps(),
                        up: l.up,
                        reserved_mbps: reserved.get(id).copied().unwrap_or_default().mbps(),
                        offered_mbps: off.mbps(),
                        utilization,
                    },
                )
            })
            .collect();
        let flows = self
            .flows
            .values()
            .map(|f| {
                (
                    f.id.clone(),
                    FlowMetrics {
                        state: f.state,
                        rate_mbps: f.rate.mbps(),
                        links: f.path.links.clone(),
                        bytes_sourced: f.counters.sourced.bytes(),
                        bytes_delivered: f.counters.delivered.bytes(),
                        bytes_cached: f.counters.cached.bytes(),
                        bytes_lost: f.counters.lost.bytes(),
                        bytes_cached_peak: f.cached_peak.bytes(),
                        drain_mbps: f.drain_rate.mbps(),
                    },
                )
            })
            .collect();
        let caches = self
            .caches
            .values()
            .map(|c| {
                let per_flow = self
                    .flows
                    .values()
                    .filter(|f| {
                        f.cache_node.as_ref() == Some(&c.node)
                            && f.counters.cached > Millibits::default()
                    })
                    .map(|f| (f.id.clone(), f.counters.cached.bytes()))
                    .collect();
                (
                    c.node.clone(),
                    CacheMetrics {
                        capacity_mib: c.capacity.bytes() / MIB_BYTES,
                        occupied_mib: c.occupied.bytes() / MIB_BYTES,
                        flows: per_flow,
                    },
                )
            })
            .collect();
        MetricsReport {
            time_s: self.now.as_secs_f64(),
            links,
            flows,
            caches,
        }
    }

    /// Checks per-flow conservation and cache occupancy bookkeeping.
    pub fn check_invariants(&self) -> Result<(), String> {
        for f in self.flows.values() {
            if !f.counters.is_conserved() {
                return Err(format!(
                    "flow {}: counters not conserved: {:?}",
                    f.id, f.counters
                ));
            }
        }
        for c in self.caches.values() {
            let sum = self
                .flows
                .values()
                .filter(|f| f.cache_node.as_ref() == Some(&c.node))
                .fold(Millibits::default(), |acc, f| acc + f.counters.cached);
            if sum != c.occupied {
                return Err(format!(
                    "cache {}: occupied {:?} != buffered {:?}",
                    c.node, c.occupied, sum
                ));
            }
            if c.occupied > c.capacity {
                return Err(format!("cache {} over capacity", c.node));
            }
        }
        Ok(())
    }
}
