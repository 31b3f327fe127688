//! Admission: accept or reject a request against the current state, holding a
//! reservation on acceptance, and the first-come first-served queue that
//! chains negotiation and placement one request at a time.

use serde::{Deserialize, Serialize};

use crate::inventory::InventoryError;
use crate::model::{DeploymentRequest, NodeId, Placement, RequestId, ReservationId, SimTime};
use crate::orchestrator::Orchestrator;
use crate::scheduler::{self, CheckKind, FilterVerdict, ScoredNode};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionReason {
    pub node: NodeId,
    /// The first requirement the node failed.
    pub requirement: CheckKind,
    /// Every failure on the node, `; `-separated.
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NegotiationOutcome {
    Accepted {
        reservation: ReservationId,
        candidate: NodeId,
    },
    Rejected {
        reasons: Vec<RejectionReason>,
    },
}

impl NegotiationOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, NegotiationOutcome::Accepted { .. })
    }
}

/// What the scheduler saw when deciding on a request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub request: RequestId,
    pub at: SimTime,
    pub verdicts: Vec<FilterVerdict>,
    pub scores: Vec<ScoredNode>,
    pub chosen: Option<NodeId>,
}

/// Result of one queue transaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub request: RequestId,
    pub outcome: NegotiationOutcome,
    pub placement: Option<Placement>,
    pub trace: DecisionTrace,
    pub attempts: u32,
}

fn reasons_from(verdicts: &[FilterVerdict]) -> Vec<RejectionReason> {
    verdicts
        .iter()
        .filter_map(|v| {
            let first = v.failures().next()?;
            Some(RejectionReason {
                node: v.node.clone(),
                requirement: first.kind,
                detail: v
                    .failures()
                    .map(|c| format!("{}: {}", c.requirement, c.detail))
                    .collect::<Vec<_>>()
                    .join("; "),
            })
        })
        .collect()
}

/// Filters and ranks against a fresh snapshot and, if some node passes,
/// holds a reservation on the best one. A rejection leaves the inventory
/// untouched.
pub fn negotiate(
    sys: &mut Orchestrator,
    request: &DeploymentRequest,
) -> Result<(NegotiationOutcome, DecisionTrace), InventoryError> {
    let view = sys.snapshot();
    let ctx = sys.context(&view);
    let mut evaluations = scheduler::rank(&ctx, request, sys.execution);
    let scores: Vec<ScoredNode> = evaluations
        .iter()
        .filter_map(|e| e.scored.clone())
        .collect();
    let chosen = scheduler::choose(&scores).map(|s| s.node.clone());
    let verdicts = evaluations
        .iter()
        .map(|e| e.verdict.clone())
        .collect::<Vec<_>>();
    let trace = DecisionTrace {
        request: request.id.clone(),
        at: sys.now(),
        verdicts,
        scores,
        chosen: chosen.clone(),
    };
    let Some(candidate) = chosen else {
        return Ok((
            NegotiationOutcome::Rejected {
                reasons: reasons_from(&trace.verdicts),
            },
            trace,
        ));
    };
    let (_, footprint) = scheduler::footprint(request, sys.config());
    let idx = evaluations
        .iter()
        .position(|e| e.verdict.node == candidate)
        .expect("chosen node was evaluated");
    let bookings = std::mem::take(&mut evaluations[idx].bookings);
    let (now, ttl) = (sys.now(), sys.config().reservation_ttl_ms);
    let reservation =
        sys.inventory_mut()
            .hold(&request.id, &candidate, footprint, bookings, now, ttl)?;
    Ok((
        NegotiationOutcome::Accepted {
            reservation: reservation.id,
            candidate,
        },
        trace,
    ))
}

/// Runs one request through negotiation and placement. If the commit finds
/// the reservation expired, negotiation is retried once.
///
/// `between` runs after each acceptance and before the commit; the queue
/// passes a no-op.
pub fn transact<F>(sys: &mut Orchestrator, request: &DeploymentRequest, mut between: F) -> Decision
where
    F: FnMut(&mut Orchestrator, u32),
{
    let mut attempts = 0;
    loop {
        attempts += 1;
        let (outcome, trace) = match negotiate(sys, request) {
            Ok(r) => r,
            Err(e) => {
                tracing::error!(request = %request.id, error = %e, "hold failed on a passing node");
                return failed(request, sys.now(), attempts, None, e.to_string());
            }
        };
        let NegotiationOutcome::Accepted {
            reservation,
            ref candidate,
        } = outcome
        else {
            return Decision {
                request: request.id.clone(),
                outcome,
                placement: None,
                trace,
                attempts,
            };
        };
        between(sys, attempts);
        let now = sys.now();
        let (inventory, flows) = sys.parts_mut();
        match scheduler::schedule(inventory, flows, request, reservation, now) {
            Ok(placement) => {
                return Decision {
                    request: request.id.clone(),
                    outcome,
                    placement: Some(placement),
                    trace,
                    attempts,
                }
            }
            Err(InventoryError::InvalidState { .. }) if attempts < 2 => {
                tracing::warn!(request = %request.id, "reservation expired before commit; renegotiating");
            }
            Err(e) => {
                let candidate = candidate.clone();
                return failed(
                    request,
                    now,
                    attempts,
                    Some((candidate, trace)),
                    e.to_string(),
                );
            }
        }
    }
}

fn failed(
    request: &DeploymentRequest,
    at: SimTime,
    attempts: u32,
    last: Option<(NodeId, DecisionTrace)>,
    detail: String,
) -> Decision {
    let (node, trace) = match last {
        Some((n, t)) => (n, t),
        None => (
            NodeId::new("-"),
            DecisionTrace {
                request: request.id.clone(),
                at,
                verdicts: Vec::new(),
                scores: Vec::new(),
                chosen: None,
            },
        ),
    };
    Decision {
        request: request.id.clone(),
        outcome: NegotiationOutcome::Rejected {
            reasons: vec![RejectionReason {
                node,
                requirement: CheckKind::Compute,
                detail: format!("placement failed: {detail}"),
            }],
        },
        placement: None,
        trace,
        attempts,
    }
}

/// Processes requests strictly in order; each transaction completes before
/// the next request is examined.
pub fn run_queue<I>(sys: &mut Orchestrator, queue: I) -> Vec<Decision>
where
    I: IntoIterator<Item = DeploymentRequest>,
{
    queue
        .into_iter()
        .map(|r| transact(sys, &r, |_, _| {}))
        .collect()
}
