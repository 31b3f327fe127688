//! The simulated system: topology, inventory, flows and the virtual clock,
//! kept consistent with each other.

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::flowsim::{FlowSim, MetricsReport};
use crate::inventory::{Inventory, InventoryError, InventoryState, InventoryView};
use crate::model::{LinkId, NodeId, RequestId, ReservationId, SimTime};
use crate::scheduler::{Execution, SchedulingContext};
use crate::topology::{LinkStatus, Topology, TopologyDoc, TopologyError};

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Inventory(#[from] InventoryError),
}

#[derive(Debug, Clone)]
pub struct Orchestrator {
    topology: Topology,
    inventory: Inventory,
    flows: FlowSim,
    config: EngineConfig,
    now: SimTime,
    pub execution: Execution,
}

/// Serializable form of an [`Orchestrator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrchestratorImage {
    pub topology: TopologyDoc,
    pub inventory: InventoryState,
    pub flows: FlowSim,
    pub config: EngineConfig,
    pub now: SimTime,
}

impl Orchestrator {
    pub fn new(topology: Topology, config: EngineConfig) -> Orchestrator {
        let inventory = Inventory::from_topology(&topology);
        let flows = FlowSim::new(&topology, config.drain_multiplier);
        Orchestrator {
            topology,
            inventory,
            flows,
            config,
            now: SimTime::ZERO,
            execution: Execution::default(),
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn inventory(&self) -> &Inventory {
        &self.inventory
    }

    pub fn flows(&self) -> &FlowSim {
        &self.flows
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn snapshot(&self) -> InventoryView {
        self.inventory.snapshot()
    }

    pub fn context<'a>(&'a self, view: &'a InventoryView) -> SchedulingContext<'a> {
        SchedulingContext::new(&self.topology, view, &self.config)
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut Inventory, &mut FlowSim) {
        (&mut self.inventory, &mut self.flows)
    }

    pub(crate) fn inventory_mut(&mut self) -> &mut Inventory {
        &mut self.inventory
    }

    /// Moves the virtual clock forward, expiring stale reservations and
    /// advancing every flow.
    pub fn advance(&mut self, dt_ms: u64) -> Vec<ReservationId> {
        self.now = self.now.plus_millis(dt_ms);
        let expired = self.inventory.expire_reservations(self.now);
        self.flows.advance(dt_ms);
        self.inventory.take_events();
        expired
    }

    /// Changes a link's state everywhere. Returns whether anything changed.
    pub fn set_link_state(
        &mut self,
        link: &LinkId,
        status: LinkStatus,
    ) -> Result<bool, OrchestratorError> {
        let Some(event) = self.topology.set_link_state(link, status)? else {
            return Ok(false);
        };
        self.inventory
            .set_link_state(link, status == LinkStatus::Up)?;
        self.flows.on_link_state_changed(&event);
        self.inventory.take_events();
        Ok(true)
    }

    /// Evicts every placement on `node` and stops the flows involving them.
    pub fn evict_node(&mut self, node: &NodeId) -> Result<Vec<RequestId>, OrchestratorError> {
        let evicted = self.inventory.evict_placements_on(node)?;
        for r in &evicted {
            self.flows.remove_flows_of(r);
        }
        self.inventory.take_events();
        Ok(evicted)
    }

    pub fn report(&self) -> MetricsReport {
        self.flows.report()
    }

    pub fn to_image(&self) -> OrchestratorImage {
        OrchestratorImage {
            topology: self.topology.to_doc(),
            inventory: self.inventory.state().clone(),
            flows: self.flows.clone(),
            config: self.config.clone(),
            now: self.now,
        }
    }

    pub fn from_image(image: OrchestratorImage) -> Result<Orchestrator, OrchestratorError> {
        Ok(Orchestrator {
            topology: Topology::from_doc(&image.topology)?,
            inventory: Inventory::from_state(image.inventory),
            flows: image.flows,
            config: image.config,
            now: image.now,
            execution: Execution::default(),
        })
    }

    /// Checks cross-module consistency: inventory conservation, flow
    /// conservation, and link states agreeing across modules.
    pub fn check_invariants(&self) -> Result<(), String> {
        self.inventory.state().check_invariants()?;
        self.flows.check_invariants()?;
        for l in self.topology.links() {
            let inv = self
                .inventory
                .state()
                .link(&l.id)
                .ok_or_else(|| format!("link {} missing from inventory", l.id))?;
            if inv.up != l.is_up() {
                return Err(format!("link {} state disagrees", l.id));
            }
        }
        Ok(())
    }
}
