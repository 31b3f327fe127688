//! Single source of truth for resource availability.
//!
//! All mutations go through one `&mut Inventory`; readers take cheap
//! [`InventoryView`] snapshots that later writes never touch (the state is
//! copy-on-write behind an `Arc`). When a journal is attached, every
//! successful mutation is appended to the state file before it is applied.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::model::{
    Bandwidth, LinkId, NetworkReservation, NodeId, Placement, PlacementState, RequestId,
    ReservationId, ResourceVector, SimTime, TrafficClass,
};
use crate::store::{self, RecordKind, RecordLog, StoreError};
use crate::topology::{LinkStateChanged, LinkStatus, Topology};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeState {
    pub node: NodeId,
    pub capacity: ResourceVector,
    pub allocated: ResourceVector,
    pub reserved: ResourceVector,
}

impl NodeState {
    /// Capacity minus allocated and reserved quantities.
    pub fn free(&self) -> ResourceVector {
        self.capacity
            .saturating_sub(&(self.allocated + self.reserved))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkState {
    pub link: LinkId,
    pub capacity: Bandwidth,
    /// Guaranteed bandwidth, held or committed. Never exceeds capacity.
    pub reserved: Bandwidth,
    /// Best-effort load booked by placed components. May exceed capacity.
    pub best_effort: Bandwidth,
    pub up: bool,
}

impl LinkState {
    /// Bandwidth still available for new guaranteed traffic.
    pub fn residual(&self) -> Bandwidth {
        self.capacity
            .saturating_sub(self.reserved)
            .saturating_sub(self.best_effort)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReservationState {
    Held,
    Committed,
    Released,
    Expired,
}

impl fmt::Display for ReservationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reservation {
    pub id: ReservationId,
    pub request_id: RequestId,
    pub node: NodeId,
    pub resources: ResourceVector,
    pub network: Vec<NetworkReservation>,
    pub created_at: SimTime,
    pub ttl_ms: u64,
    pub state: ReservationState,
}

impl Reservation {
    pub fn expires_at(&self) -> SimTime {
        self.created_at.plus_millis(self.ttl_ms)
    }

    /// Strict: a reservation is still live at exactly `created_at + ttl`.
    pub fn is_expired_at(&self, now: SimTime) -> bool {
        now > self.expires_at()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResourceKind {
    Vcpus,
    Ram,
    Disk,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shortfall {
    /// `amount` is in the resource's native unit: millicores, MiB or GiB.
    Node {
        node: NodeId,
        resource: ResourceKind,
        amount: u64,
    },
    Link {
        link: LinkId,
        amount: Bandwidth,
    },
}

impl fmt::Display for Shortfall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shortfall::Node {
                node,
                resource: ResourceKind::Vcpus,
                amount,
            } => write!(f, "node {node} short of {} vcpus", *amount as f64 / 1000.0),
            Shortfall::Node {
                node,
                resource: ResourceKind::Ram,
                amount,
            } => write!(f, "node {node} short of {amount} MiB ram"),
            Shortfall::Node {
                node,
                resource: ResourceKind::Disk,
                amount,
            } => write!(f, "node {node} short of {amount} GiB disk"),
            Shortfall::Link { link, amount } => {
                write!(f, "link {link} short of {} Mbit/s", amount.mbps())
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum InventoryError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("unknown link `{0}`")]
    UnknownLink(LinkId),
    #[error("unknown reservation {0}")]
    UnknownReservation(ReservationId),
    #[error("link `{0}` is down")]
    LinkDown(LinkId),
    #[error("insufficient resources: {shortfall}")]
    InsufficientResources { shortfall: Shortfall },
    #[error("reservation {reservation} is {state}")]
    InvalidState {
        reservation: ReservationId,
        state: ReservationState,
    },
    #[error("state file: {0}")]
    Storage(#[from] StoreError),
    #[error("state file holds no inventory snapshot")]
    MissingSnapshot,
}

/// Change notifications, drained by the owner with
/// [`Inventory::take_events`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum InventoryEvent {
    PlacementCreated { request: RequestId, node: NodeId },
    PlacementEvicted { request: RequestId, node: NodeId },
    ReservationExpired { reservation: ReservationId },
    LinkStateChanged(LinkStateChanged),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryState {
    pub nodes: BTreeMap<NodeId, NodeState>,
    pub links: BTreeMap<LinkId, LinkState>,
    pub reservations: BTreeMap<ReservationId, Reservation>,
    pub placements: BTreeMap<RequestId, Placement>,
    pub next_reservation: u64,
}

impl InventoryState {
    pub fn node(&self, id: &NodeId) -> Option<&NodeState> {
        self.nodes.get(id)
    }

    pub fn link(&self, id: &LinkId) -> Option<&LinkState> {
        self.links.get(id)
    }

    /// Residual guaranteed bandwidth of a link; zero for unknown links.
    pub fn residual(&self, id: &LinkId) -> Bandwidth {
        self.links
            .get(id)
            .map_or(Bandwidth::ZERO, LinkState::residual)
    }

    pub fn reservation(&self, id: ReservationId) -> Option<&Reservation> {
        self.reservations.get(&id)
    }

    pub fn placement(&self, id: &RequestId) -> Option<&Placement> {
        self.placements.get(id)
    }

    pub fn running_placements(&self) -> impl Iterator<Item = &Placement> {
        self.placements
            .values()
            .filter(|p| p.state == PlacementState::Running)
    }

    /// Verifies the conservation invariants: `allocated + reserved <=
    /// capacity` on every node, `reserved <= capacity` on every link, and
    /// every tracked quantity equals the sum of the records that account for
    /// it.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut alloc: BTreeMap<&NodeId, ResourceVector> = BTreeMap::new();
        let mut held: BTreeMap<&NodeId, ResourceVector> = BTreeMap::new();
        let mut g_sum: BTreeMap<&LinkId, Bandwidth> = BTreeMap::new();
        let mut b_sum: BTreeMap<&LinkId, Bandwidth> = BTreeMap::new();
        let mut bookings: Vec<&NetworkReservation> = Vec::new();
        for p in self.running_placements() {
            *alloc.entry(&p.node_id).or_default() += p.allocated;
            bookings.extend(&p.network_reservations);
        }
        for r in self.reservations.values() {
            if r.state == ReservationState::Held {
                *held.entry(&r.node).or_default() += r.resources;
                bookings.extend(&r.network);
            }
        }
        for nr in bookings {
            let sums = match nr.class {
                TrafficClass::Guaranteed => &mut g_sum,
                TrafficClass::BestEffort => &mut b_sum,
            };
            for l in &nr.path.links {
                *sums.entry(l).or_default() += nr.bandwidth;
            }
        }

        for (id, n) in &self.nodes {
            if !(n.allocated + n.reserved).fits_within(&n.capacity) {
                return Err(format!("node {id}: allocated + reserved exceeds capacity"));
            }
            let a = alloc.get(id).copied().unwrap_or_default();
            if a != n.allocated {
                return Err(format!(
                    "node {id}: allocated {} != placements {a}",
                    n.allocated
                ));
            }
            let h = held.get(id).copied().unwrap_or_default();
            if h != n.reserved {
                return Err(format!("node {id}: reserved {} != held {h}", n.reserved));
            }
        }
        for (id, l) in &self.links {
            if l.reserved > l.capacity {
                return Err(format!("link {id}: reserved exceeds capacity"));
            }
            let g = g_sum.get(id).copied().unwrap_or_default();
            if g != l.reserved {
                return Err(format!("link {id}: reserved {} != booked {g}", l.reserved));
            }
            let b = b_sum.get(id).copied().unwrap_or_default();
            if b != l.best_effort {
                return Err(format!(
                    "link {id}: best effort {} != booked {b}",
                    l.best_effort
                ));
            }
        }
        Ok(())
    }
}

/// Immutable point-in-time view of the inventory.
#[derive(Debug, Clone, PartialEq)]
pub struct InventoryView(Arc<InventoryState>);

impl Deref for InventoryView {
    type Target = InventoryState;

    fn deref(&self) -> &InventoryState {
        &self.0
    }
}

/// A mutation, as recorded in the journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InventoryOp {
    Hold {
        request: RequestId,
        node: NodeId,
        resources: ResourceVector,
        network: Vec<NetworkReservation>,
        now: SimTime,
        ttl_ms: u64,
    },
    Commit {
        reservation: ReservationId,
        placement: Placement,
        now: SimTime,
    },
    Release {
        reservation: ReservationId,
    },
    Expire {
        now: SimTime,
    },
    Evict {
        node: NodeId,
    },
    SetLink {
        link: LinkId,
        up: bool,
    },
}

enum OpOutput {
    Reservation(Reservation),
    Ids(Vec<ReservationId>),
    Requests(Vec<RequestId>),
    Unit,
}

#[derive(Debug)]
struct Journal {
    log: RecordLog,
    ops_since_snapshot: u32,
    snapshot_interval: u32,
}

#[derive(Debug)]
pub struct Inventory {
    state: Arc<InventoryState>,
    events: Vec<InventoryEvent>,
    journal: Option<Journal>,
}

/// Clones the state and pending events; the clone has no journal attached.
impl Clone for Inventory {
    fn clone(&self) -> Self {
        Inventory {
            state: Arc::clone(&self.state),
            events: self.events.clone(),
            journal: None,
        }
    }
}

impl Inventory {
    pub fn from_topology(topo: &Topology) -> Inventory {
        let nodes = topo
            .nodes()
            .map(|n| {
                (
                    n.id.clone(),
                    NodeState {
                        node: n.id.clone(),
                        capacity: n.capacity,
                        allocated: ResourceVector::ZERO,
                        reserved: ResourceVector::ZERO,
                    },
                )
            })
            .collect();
        let links = topo
            .links()
            .map(|l| {
                (
                    l.id.clone(),
                    LinkState {
                        link: l.id.clone(),
                        capacity: l.bandwidth,
                        reserved: Bandwidth::ZERO,
                        best_effort: Bandwidth::ZERO,
                        up: l.status == LinkStatus::Up,
                    },
                )
            })
            .collect();
        Inventory::from_state(InventoryState {
            nodes,
            links,
            reservations: BTreeMap::new(),
            placements: BTreeMap::new(),
            next_reservation: 1,
        })
    }

    pub fn from_state(state: InventoryState) -> Inventory {
        Inventory {
            state: Arc::new(state),
            events: Vec::new(),
            journal: None,
        }
    }

    /// A consistent view; later mutations never alter it.
    pub fn snapshot(&self) -> InventoryView {
        InventoryView(Arc::clone(&self.state))
    }

    pub fn state(&self) -> &InventoryState {
        &self.state
    }

    pub fn take_events(&mut self) -> Vec<InventoryEvent> {
        std::mem::take(&mut self.events)
    }

    /// Atomically holds `resources` on `node` and the guaranteed part of
    /// `network` on every path link. On failure nothing changes.
    pub fn hold(
        &mut self,
        request: &RequestId,
        node: &NodeId,
        resources: ResourceVector,
        network: Vec<NetworkReservation>,
        now: SimTime,
        ttl_ms: u64,
    ) -> Result<Reservation, InventoryError> {
        let op = InventoryOp::Hold {
            request: request.clone(),
            node: node.clone(),
            resources,
            network,
            now,
            ttl_ms,
        };
        match self.execute(op)? {
            OpOutput::Reservation(r) => Ok(r),
            _ => unreachable!(),
        }
    }

    /// Moves a held reservation into allocations and records the placement.
    /// The placement's node, resources and network bookings are taken from
    /// the reservation.
    pub fn commit(
        &mut self,
        reservation: ReservationId,
        placement: Placement,
        now: SimTime,
    ) -> Result<(), InventoryError> {
        self.execute(InventoryOp::Commit {
            reservation,
            placement,
            now,
        })
        .map(|_| ())
    }

    pub fn release(&mut self, reservation: ReservationId) -> Result<(), InventoryError> {
        self.execute(InventoryOp::Release { reservation })
            .map(|_| ())
    }

    /// Expires every held reservation with `created_at + ttl < now`.
    pub fn expire_reservations(&mut self, now: SimTime) -> Vec<ReservationId> {
        let any = self
            .state
            .reservations
            .values()
            .any(|r| r.state == ReservationState::Held && r.is_expired_at(now));
        if !any {
            return Vec::new();
        }
        match self.execute(InventoryOp::Expire { now }) {
            Ok(OpOutput::Ids(ids)) => ids,
            Ok(_) => unreachable!(),
            Err(e) => {
                tracing::error!(error = %e, "cannot journal reservation expiry");
                Vec::new()
            }
        }
    }

    /// Evicts every running placement on `node`, freeing its allocations and
    /// every bandwidth booking that involves it.
    pub fn evict_placements_on(&mut self, node: &NodeId) -> Result<Vec<RequestId>, InventoryError> {
        match self.execute(InventoryOp::Evict { node: node.clone() })? {
            OpOutput::Requests(r) => Ok(r),
            _ => unreachable!(),
        }
    }

    /// Mirrors a link state change. Returns whether anything changed.
    pub fn set_link_state(&mut self, link: &LinkId, up: bool) -> Result<bool, InventoryError> {
        let cur = self
            .state
            .links
            .get(link)
            .ok_or_else(|| InventoryError::UnknownLink(link.clone()))?;
        if cur.up == up {
            return Ok(false);
        }
        self.execute(InventoryOp::SetLink {
            link: link.clone(),
            up,
        })?;
        Ok(true)
    }

    fn execute(&mut self, op: InventoryOp) -> Result<OpOutput, InventoryError> {
        self.check(&op)?;
        if let Some(j) = &mut self.journal {
            let payload = serde_json::to_vec(&op).map_err(StoreError::from)?;
            j.log.append(RecordKind::InventoryOp, &payload)?;
            j.ops_since_snapshot += 1;
        }
        let out = self.apply(op);
        let compact = self
            .journal
            .as_ref()
            .is_some_and(|j| j.ops_since_snapshot >= j.snapshot_interval);
        if compact {
            let (path, interval) = {
                let j = self.journal.as_ref().unwrap();
                (j.log.path().to_owned(), j.snapshot_interval)
            };
            self.open_journal(&path, interval)?;
        }
        Ok(out)
    }

    /// Validates an operation against the current state without mutating.
    fn check(&self, op: &InventoryOp) -> Result<(), InventoryError> {
        let s = &*self.state;
        match op {
            InventoryOp::Hold {
                node,
                resources,
                network,
                ..
            } => {
                let ns = s
                    .nodes
                    .get(node)
                    .ok_or_else(|| InventoryError::UnknownNode(node.clone()))?;
                let mut need: BTreeMap<&LinkId, Bandwidth> = BTreeMap::new();
                for nr in network {
                    for l in &nr.path.links {
                        let ls = s
                            .links
                            .get(l)
                            .ok_or_else(|| InventoryError::UnknownLink(l.clone()))?;
                        if !ls.up {
                            return Err(InventoryError::LinkDown(l.clone()));
                        }
                        if nr.class == TrafficClass::Guaranteed {
                            *need.entry(l).or_default() += nr.bandwidth;
                        }
                    }
                }
                let used = ns.allocated + ns.reserved;
                let total = used + *resources;
                let short = [
                    (ResourceKind::Vcpus, total.millicpus, ns.capacity.millicpus),
                    (ResourceKind::Ram, total.ram_mib, ns.capacity.ram_mib),
                    (ResourceKind::Disk, total.disk_gib, ns.capacity.disk_gib),
                ]
                .into_iter()
                .find(|(_, want, cap)| want > cap);
                if let Some((resource, want, cap)) = short {
                    return Err(InventoryError::InsufficientResources {
                        shortfall: Shortfall::Node {
                            node: node.clone(),
                            resource,
                            amount: want - cap,
                        },
                    });
                }
                for (l, bw) in need {
                    let avail = s.links[l].residual();
                    if bw > avail {
                        return Err(InventoryError::InsufficientResources {
                            shortfall: Shortfall::Link {
                                link: l.clone(),
                                amount: Bandwidth::from_bps(bw.bps() - avail.bps()),
                            },
                        });
                    }
                }
                Ok(())
            }
            InventoryOp::Commit {
                reservation, now, ..
            } => {
                let r = s
                    .reservations
                    .get(reservation)
                    .ok_or(InventoryError::UnknownReservation(*reservation))?;
                match r.state {
                    ReservationState::Held if r.is_expired_at(*now) => {
                        Err(InventoryError::InvalidState {
                            reservation: *reservation,
                            state: ReservationState::Expired,
                        })
                    }
                    ReservationState::Held => Ok(()),
                    state => Err(InventoryError::InvalidState {
                        reservation: *reservation,
                        state,
                    }),
                }
            }
            InventoryOp::Release { reservation } => {
                let r = s
                    .reservations
                    .get(reservation)
                    .ok_or(InventoryError::UnknownReservation(*reservation))?;
                match r.state {
                    ReservationState::Held => Ok(()),
                    state => Err(InventoryError::InvalidState {
                        reservation: *reservation,
                        state,
                    }),
                }
            }
            InventoryOp::Expire { .. } => Ok(()),
            InventoryOp::Evict { node } => {
                if s.nodes.contains_key(node) {
                    Ok(())
                } else {
                    Err(InventoryError::UnknownNode(node.clone()))
                }
            }
            InventoryOp::SetLink { link, .. } => {
                if s.links.contains_key(link) {
                    Ok(())
                } else {
                    Err(InventoryError::UnknownLink(link.clone()))
                }
            }
        }
    }

    /// Applies a checked operation.
    fn apply(&mut self, op: InventoryOp) -> OpOutput {
        let s = Arc::make_mut(&mut self.state);
        match op {
            InventoryOp::Hold {
                request,
                node,
                resources,
                network,
                now,
                ttl_ms,
            } => {
                let id = ReservationId(s.next_reservation);
                s.next_reservation += 1;
                s.nodes.get_mut(&node).unwrap().reserved += resources;
                book(&mut s.links, &network, true);
                let r = Reservation {
                    id,
                    request_id: request,
                    node,
                    resources,
                    network,
                    created_at: now,
                    ttl_ms,
                    state: ReservationState::Held,
                };
                s.reservations.insert(id, r.clone());
                OpOutput::Reservation(r)
            }
            InventoryOp::Commit {
                reservation,
                mut placement,
                ..
            } => {
                let r = s.reservations.get_mut(&reservation).unwrap();
                r.state = ReservationState::Committed;
                let ns = s.nodes.get_mut(&r.node).unwrap();
                ns.reserved = ns.reserved.saturating_sub(&r.resources);
                ns.allocated += r.resources;
                placement.request_id = r.request_id.clone();
                placement.node_id = r.node.clone();
                placement.allocated = r.resources;
                placement.network_reservations = r.network.clone();
                placement.state = PlacementState::Running;
                self.events.push(InventoryEvent::PlacementCreated {
                    request: placement.request_id.clone(),
                    node: placement.node_id.clone(),
                });
                s.placements.insert(placement.request_id.clone(), placement);
                OpOutput::Unit
            }
            InventoryOp::Release { reservation } => {
                let r = s.reservations.get_mut(&reservation).unwrap();
                r.state = ReservationState::Released;
                let ns = s.nodes.get_mut(&r.node).unwrap();
                ns.reserved = ns.reserved.saturating_sub(&r.resources);
                let net = r.network.clone();
                book(&mut s.links, &net, false);
                OpOutput::Unit
            }
            InventoryOp::Expire { now } => {
                let mut expired = Vec::new();
                for r in s.reservations.values_mut() {
                    if r.state == ReservationState::Held && r.is_expired_at(now) {
                        r.state = ReservationState::Expired;
                        let ns = s.nodes.get_mut(&r.node).unwrap();
                        ns.reserved = ns.reserved.saturating_sub(&r.resources);
                        book(&mut s.links, &r.network, false);
                        expired.push(r.id);
                        self.events
                            .push(InventoryEvent::ReservationExpired { reservation: r.id });
                    }
                }
                OpOutput::Ids(expired)
            }
            InventoryOp::Evict { node } => {
                let evicted: Vec<RequestId> = s
                    .placements
                    .values()
                    .filter(|p| p.node_id == node && p.state == PlacementState::Running)
                    .map(|p| p.request_id.clone())
                    .collect();
                for id in &evicted {
                    let p = s.placements.get_mut(id).unwrap();
                    p.state = PlacementState::Evicted;
                    let ns = s.nodes.get_mut(&p.node_id).unwrap();
                    ns.allocated = ns.allocated.saturating_sub(&p.allocated);
                    let net = std::mem::take(&mut p.network_reservations);
                    book(&mut s.links, &net, false);
                    self.events.push(InventoryEvent::PlacementEvicted {
                        request: id.clone(),
                        node: node.clone(),
                    });
                }
                // Bookings held by other placements for flows to the evicted ones.
                for p in s.placements.values_mut() {
                    if p.state != PlacementState::Running {
                        continue;
                    }
                    let (gone, keep): (Vec<_>, Vec<_>) =
                        std::mem::take(&mut p.network_reservations)
                            .into_iter()
                            .partition(|nr| {
                                nr.counterpart.as_ref().is_some_and(|c| evicted.contains(c))
                            });
                    p.network_reservations = keep;
                    book(&mut s.links, &gone, false);
                }
                OpOutput::Requests(evicted)
            }
            InventoryOp::SetLink { link, up } => {
                s.links.get_mut(&link).unwrap().up = up;
                self.events
                    .push(InventoryEvent::LinkStateChanged(LinkStateChanged {
                        link,
                        status: if up { LinkStatus::Up } else { LinkStatus::Down },
                    }));
                OpOutput::Unit
            }
        }
    }

    /// Writes a full snapshot to `path`, replacing any existing file.
    pub fn persist(&self, path: &Path) -> Result<(), InventoryError> {
        store::write_atomic(path, &self.snapshot_image()?)?;
        Ok(())
    }

    fn snapshot_image(&self) -> Result<Vec<u8>, InventoryError> {
        let mut image = Vec::new();
        store::encode_header(&mut image);
        let payload = serde_json::to_vec(&*self.state).map_err(StoreError::from)?;
        store::encode_record(&mut image, RecordKind::InventorySnapshot, &payload);
        Ok(image)
    }

    /// Rebuilds an inventory from a state file: the latest snapshot plus any
    /// journaled operations after it. The journal is not reattached.
    pub fn restore(path: &Path) -> Result<Inventory, InventoryError> {
        let records = store::read_file(path)?;
        let mut inv: Option<Inventory> = None;
        for (kind, payload) in records {
            match kind {
                RecordKind::InventorySnapshot => {
                    let state: InventoryState =
                        serde_json::from_slice(&payload).map_err(StoreError::from)?;
                    inv = Some(Inventory::from_state(state));
                }
                RecordKind::InventoryOp => {
                    let target = inv.as_mut().ok_or(InventoryError::MissingSnapshot)?;
                    let op: InventoryOp =
                        serde_json::from_slice(&payload).map_err(StoreError::from)?;
                    target.check(&op)?;
                    target.apply(op);
                }
                RecordKind::EngineSnapshot => {
                    return Err(
                        StoreError::Layout("engine snapshot in an inventory file".into()).into(),
                    )
                }
            }
        }
        let mut inv = inv.ok_or(InventoryError::MissingSnapshot)?;
        inv.events.clear();
        Ok(inv)
    }

    /// Starts journaling to `path`: writes a fresh snapshot, then appends
    /// every mutation, compacting after `snapshot_interval` operations.
    pub fn open_journal(
        &mut self,
        path: &Path,
        snapshot_interval: u32,
    ) -> Result<(), InventoryError> {
        let log = RecordLog::create(path, &self.snapshot_image()?)?;
        self.journal = Some(Journal {
            log,
            ops_since_snapshot: 0,
            snapshot_interval: snapshot_interval.max(1),
        });
        Ok(())
    }

    pub fn close_journal(&mut self) {
        self.journal = None;
    }
}

/// Adds (`add = true`) or removes the bandwidth of `network` on its path links.
fn book(links: &mut BTreeMap<LinkId, LinkState>, network: &[NetworkReservation], add: bool) {
    for nr in network {
        for l in &nr.path.links {
            let ls = links.get_mut(l).expect("checked link");
            let slot = match nr.class {
                TrafficClass::Guaranteed => &mut ls.reserved,
                TrafficClass::BestEffort => &mut ls.best_effort,
            };
            *slot = if add {
                slot.saturating_add(nr.bandwidth)
            } else {
                slot.saturating_sub(nr.bandwidth)
            };
        }
    }
}
