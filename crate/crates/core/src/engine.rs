//! Service façade over the orchestrator: request intake, the FCFS queue,
//! per-request status and decision traces, audit records, and whole-engine
//! persistence.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::flowsim::MetricsReport;
use crate::inventory::InventoryView;
use crate::model::{
    validate_request, DeploymentRequest, LinkId, NodeId, Placement, PlacementState, RequestDoc,
    RequestId, SimTime, ValidationError,
};
use crate::negotiator::{self, DecisionTrace, NegotiationOutcome, RejectionReason};
use crate::orchestrator::{Orchestrator, OrchestratorError, OrchestratorImage};
use crate::store::{self, RecordKind, StoreError};
use crate::topology::{LinkStatus, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RequestState {
    Queued,
    Accepted,
    Placed,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub request: DeploymentRequest,
    pub state: RequestState,
    pub placement: Option<Placement>,
    pub reasons: Vec<RejectionReason>,
}

/// One audit entry per decided request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub request: RequestId,
    pub outcome: RequestState,
    pub candidate: Option<NodeId>,
    pub reasons: Vec<RejectionReason>,
    pub at_ms: u64,
    pub attempts: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum SubmitError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("{0}")]
    Conflict(String),
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("unknown link `{0}`")]
    UnknownLink(LinkId),
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("state file holds no engine snapshot")]
    MissingSnapshot,
}

#[derive(Debug, Clone)]
pub struct Engine {
    sys: Orchestrator,
    records: BTreeMap<RequestId, RequestRecord>,
    /// Submission order.
    order: Vec<RequestId>,
    queue: VecDeque<RequestId>,
    traces: BTreeMap<RequestId, DecisionTrace>,
    audit: Vec<DecisionRecord>,
    next_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EngineImage {
    system: OrchestratorImage,
    records: Vec<RequestRecord>,
    queue: Vec<RequestId>,
    traces: Vec<DecisionTrace>,
    audit: Vec<DecisionRecord>,
    next_seq: u64,
    #[serde(default)]
    extra: serde_json::Value,
}

impl Engine {
    pub fn new(topology: Topology, config: EngineConfig) -> Engine {
        Engine::from_system(Orchestrator::new(topology, config))
    }

    pub fn from_system(sys: Orchestrator) -> Engine {
        Engine {
            sys,
            records: BTreeMap::new(),
            order: Vec::new(),
            queue: VecDeque::new(),
            traces: BTreeMap::new(),
            audit: Vec::new(),
            next_seq: 1,
        }
    }

    pub fn system(&self) -> &Orchestrator {
        &self.sys
    }

    pub fn system_mut(&mut self) -> &mut Orchestrator {
        &mut self.sys
    }

    pub fn topology(&self) -> &Topology {
        self.sys.topology()
    }

    pub fn now(&self) -> SimTime {
        self.sys.now()
    }

    pub fn snapshot(&self) -> InventoryView {
        self.sys.snapshot()
    }

    /// Validates and enqueues a request. Ids default to `req-N`.
    pub fn submit(&mut self, doc: &RequestDoc) -> Result<RequestId, SubmitError> {
        let mut fallback = RequestId::new(format!("req-{}", self.next_seq));
        while self.records.contains_key(&fallback) {
            self.next_seq += 1;
            fallback = RequestId::new(format!("req-{}", self.next_seq));
        }
        let request = validate_request(
            doc,
            self.sys.topology(),
            self.sys.config().default_footprint,
            &fallback,
            self.sys.now(),
        )?;
        if self.records.contains_key(&request.id) {
            return Err(SubmitError::Conflict(format!(
                "request `{}` already exists",
                request.id
            )));
        }
        let clash = self.records.values().find(|r| {
            r.request.tenant == request.tenant
                && r.request.component.name == request.component.name
                && self.is_live(r)
        });
        if let Some(r) = clash {
            return Err(SubmitError::Conflict(format!(
                "tenant `{}` already has component `{}` in request `{}`",
                request.tenant, request.component.name, r.request.id
            )));
        }
        if request.id == fallback {
            self.next_seq += 1;
        }
        let id = request.id.clone();
        tracing::debug!(request = %id, "queued");
        self.records.insert(
            id.clone(),
            RequestRecord {
                request,
                state: RequestState::Queued,
                placement: None,
                reasons: Vec::new(),
            },
        );
        self.order.push(id.clone());
        self.queue.push_back(id.clone());
        Ok(id)
    }

    fn is_live(&self, r: &RequestRecord) -> bool {
        match r.state {
            RequestState::Queued | RequestState::Accepted => true,
            RequestState::Placed => self
                .sys
                .inventory()
                .state()
                .placement(&r.request.id)
                .is_some_and(|p| p.state == PlacementState::Running),
            RequestState::Rejected => false,
        }
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    /// Decides every queued request in arrival order.
    pub fn process_queue(&mut self) -> Vec<DecisionRecord> {
        let mut out = Vec::new();
        while let Some(id) = self.queue.pop_front() {
            let request = self.records[&id].request.clone();
            let decision = negotiator::transact(&mut self.sys, &request, |_, _| {});
            let record = self.records.get_mut(&id).unwrap();
            let candidate = match &decision.outcome {
                NegotiationOutcome::Accepted { candidate, .. } => Some(candidate.clone()),
                NegotiationOutcome::Rejected { .. } => None,
            };
            match (&decision.outcome, decision.placement) {
                (NegotiationOutcome::Accepted { .. }, Some(p)) => {
                    record.state = RequestState::Placed;
                    record.placement = Some(p);
                }
                (NegotiationOutcome::Accepted { .. }, None) => {
                    record.state = RequestState::Accepted
                }
                (NegotiationOutcome::Rejected { reasons }, _) => {
                    record.state = RequestState::Rejected;
                    record.reasons = reasons.clone();
                }
            }
            let entry = DecisionRecord {
                request: id.clone(),
                outcome: record.state,
                candidate,
                reasons: record.reasons.clone(),
                at_ms: self.sys.now().millis(),
                attempts: decision.attempts,
            };
            tracing::info!(
                target: "foglet::audit",
                request = %entry.request,
                outcome = ?entry.outcome,
                candidate = entry.candidate.as_ref().map(|c| c.as_str()).unwrap_or("-"),
                reasons = entry.reasons.len(),
                at_ms = entry.at_ms,
                "decision"
            );
            self.traces.insert(id, decision.trace);
            self.audit.push(entry.clone());
            out.push(entry);
        }
        out
    }

    pub fn status(&self, id: &RequestId) -> Option<&RequestRecord> {
        self.records.get(id)
    }

    pub fn explain(&self, id: &RequestId) -> Option<&DecisionTrace> {
        self.traces.get(id)
    }

    /// Requests in submission order.
    pub fn requests(&self) -> impl Iterator<Item = &RequestRecord> {
        self.order.iter().map(|id| &self.records[id])
    }

    pub fn audit(&self) -> &[DecisionRecord] {
        &self.audit
    }

    pub fn advance(&mut self, dt_ms: u64) {
        let expired = self.sys.advance(dt_ms);
        for r in expired {
            tracing::debug!(reservation = %r, "reservation expired");
        }
    }

    pub fn set_link_state(
        &mut self,
        link: &LinkId,
        status: LinkStatus,
    ) -> Result<bool, EngineError> {
        if self.sys.topology().link(link).is_none() {
            return Err(EngineError::UnknownLink(link.clone()));
        }
        let changed = self.sys.set_link_state(link, status)?;
        if changed {
            tracing::info!(link = %link, status = ?status, "link state changed");
        }
        Ok(changed)
    }

    pub fn report(&self) -> MetricsReport {
        self.sys.report()
    }

    /// Writes the whole engine to `path`, plus an opaque `extra` value that
    /// callers use for their own resumable state.
    pub fn persist(&self, path: &Path, extra: serde_json::Value) -> Result<(), EngineError> {
        let image = EngineImage {
            system: self.sys.to_image(),
            records: self
                .order
                .iter()
                .map(|id| self.records[id].clone())
                .collect(),
            queue: self.queue.iter().cloned().collect(),
            traces: self.traces.values().cloned().collect(),
            audit: self.audit.clone(),
            next_seq: self.next_seq,
            extra,
        };
        let mut bytes = Vec::new();
        store::encode_header(&mut bytes);
        let payload = serde_json::to_vec(&image).map_err(StoreError::from)?;
        store::encode_record(&mut bytes, RecordKind::EngineSnapshot, &payload);
        store::write_atomic(path, &bytes)?;
        Ok(())
    }

    /// Restores an engine written by [`Engine::persist`], returning the
    /// `extra` value alongside it.
    pub fn restore(path: &Path) -> Result<(Engine, serde_json::Value), EngineError> {
        let records = store::read_file(path)?;
        let payload = records
            .into_iter()
            .rev()
            .find(|(k, _)| *k == RecordKind::EngineSnapshot)
            .map(|(_, p)| p)
            .ok_or(EngineError::MissingSnapshot)?;
        let image: EngineImage = serde_json::from_slice(&payload).map_err(StoreError::from)?;
        let mut engine = Engine::from_system(Orchestrator::from_image(image.system)?);
        for r in image.records {
            engine.order.push(r.request.id.clone());
            engine.records.insert(r.request.id.clone(), r);
        }
        engine.queue = image.queue.into();
        engine.traces = image
            .traces
            .into_iter()
            .map(|t| (t.request.clone(), t))
            .collect();
        engine.audit = image.audit;
        engine.next_seq = image.next_seq;
        Ok((engine, image.extra))
    }
}
