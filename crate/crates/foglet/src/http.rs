//! JSON service over an [`Engine`]. Submissions are queued and answered with
//! 202; a background worker drains the queue and clients poll for outcomes.

use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use foglet_core::engine::{EngineError, RequestRecord, SubmitError};
use foglet_core::model::{
    NodeId, Placement, RequestDoc, RequestId, ResourceVector, Tier, ValidationErrorKind,
};
use foglet_core::topology::LinkStatus;
use foglet_core::{Engine, RequestState};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Notify;

#[derive(Clone)]
pub struct AppState {
    engine: Arc<Mutex<Engine>>,
    work: Arc<Notify>,
}

impl AppState {
    pub fn new(engine: Engine) -> AppState {
        AppState {
            engine: Arc::new(Mutex::new(engine)),
            work: Arc::new(Notify::new()),
        }
    }

    pub fn engine(&self) -> MutexGuard<'_, Engine> {
        self.engine.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Decides everything queued so far. Writes that change time or link
    /// state call this first, so earlier submissions are decided against the
    /// state they arrived in.
    pub fn drain(&self) -> usize {
        self.engine().process_queue().len()
    }

    /// Runs until the task is aborted, deciding queued requests as they
    /// arrive.
    pub async fn worker(self) {
        loop {
            self.work.notified().await;
            let n = self.drain();
            if n > 0 {
                tracing::debug!(decided = n, "queue drained");
            }
        }
    }

    pub fn spawn_worker(&self) -> tokio::task::JoinHandle<()> {
        tokio::spawn(self.clone().worker())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/requests", post(submit))
        .route("/v1/requests/{id}", get(status))
        .route("/v1/requests/{id}/explain", get(explain))
        .route("/v1/nodes", get(nodes))
        .route("/v1/placements", get(placements))
        .route("/v1/links/{id}/utilization", get(link_utilization))
        .route("/v1/events", post(event))
        .route("/v1/clock/advance", post(advance))
        .route("/v1/report", get(report))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, error: impl Into<String>) -> ApiError {
        ApiError {
            status,
            body: json!({ "error": error.into() }),
        }
    }

    fn not_found(what: &str, id: &str) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, format!("unknown {what} `{id}`"))
    }

    fn bad_body(reason: impl Into<String>) -> ApiError {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: json!({ "error": "invalid body", "field": "body", "reason": reason.into() }),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<SubmitError> for ApiError {
    fn from(e: SubmitError) -> ApiError {
        match e {
            SubmitError::Invalid(v) => ApiError {
                status: match v.kind {
                    ValidationErrorKind::Invalid => StatusCode::BAD_REQUEST,
                    ValidationErrorKind::UnknownReference => StatusCode::UNPROCESSABLE_ENTITY,
                },
                body: json!({ "error": v.to_string(), "field": v.field, "reason": v.reason }),
            },
            SubmitError::Conflict(msg) => ApiError::new(StatusCode::CONFLICT, msg),
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> ApiError {
        match e {
            EngineError::UnknownLink(l) => ApiError::not_found("link", l.as_str()),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
        }
    }
}

fn parse<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_body(e.to_string()))
}

async fn submit(State(app): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let doc: RequestDoc = parse(&body)?;
    let id = app.engine().submit(&doc)?;
    app.work.notify_one();
    Ok((StatusCode::ACCEPTED, Json(json!({ "request_id": id }))))
}

/// Body of `GET /v1/requests/{id}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusBody {
    pub request_id: RequestId,
    pub component: String,
    pub state: RequestState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<Placement>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reasons: Vec<foglet_core::negotiator::RejectionReason>,
}

impl From<&RequestRecord> for StatusBody {
    fn from(r: &RequestRecord) -> StatusBody {
        StatusBody {
            request_id: r.request.id.clone(),
            component: r.request.component.name.clone(),
            state: r.state,
            placement: r.placement.clone(),
            reasons: r.reasons.clone(),
        }
    }
}

async fn status(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<StatusBody>, ApiError> {
    let engine = app.engine();
    engine
        .status(&RequestId::new(id.as_str()))
        .map(|r| Json(r.into()))
        .ok_or_else(|| ApiError::not_found("request", &id))
}

async fn explain(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let engine = app.engine();
    let rid = RequestId::new(id.as_str());
    if engine.status(&rid).is_none() {
        return Err(ApiError::not_found("request", &id));
    }
    Ok(match engine.explain(&rid) {
        Some(trace) => Json(trace).into_response(),
        None => (
            StatusCode::CONFLICT,
            Json(json!({ "error": "request not decided yet" })),
        )
            .into_response(),
    })
}

/// One row of `GET /v1/nodes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeBody {
    pub id: NodeId,
    pub tier: Tier,
    pub region: String,
    pub capacity: ResourceVector,
    pub allocated: ResourceVector,
    pub reserved: ResourceVector,
    pub free: ResourceVector,
    pub cache_mib: u64,
}

async fn nodes(State(app): State<AppState>) -> Json<Vec<NodeBody>> {
    let engine = app.engine();
    let view = engine.snapshot();
    let rows = engine
        .topology()
        .nodes()
        .map(|n| {
            let s = view.node(&n.id);
            NodeBody {
                id: n.id.clone(),
                tier: n.tier,
                region: n.region.to_string(),
                capacity: n.capacity,
                allocated: s.map(|s| s.allocated).unwrap_or_default(),
                reserved: s.map(|s| s.reserved).unwrap_or_default(),
                free: s.map(|s| s.free()).unwrap_or_default(),
                cache_mib: n.cache_mib,
            }
        })
        .collect();
    Json(rows)
}

async fn placements(State(app): State<AppState>) -> Json<Vec<Placement>> {
    let view = app.engine().snapshot();
    Json(view.running_placements().cloned().collect())
}

async fn link_utilization(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let report = app.engine().report();
    let (link, m) = report
        .links
        .iter()
        .find(|(l, _)| l.as_str() == id)
        .ok_or_else(|| ApiError::not_found("link", &id))?;
    Ok(Json(json!({
        "link": link,
        "up": m.up,
        "capacity_mbps": m.capacity_mbps,
        "reserved_mbps": m.reserved_mbps,
        "offered_mbps": m.offered_mbps,
        "utilization": m.utilization,
    })))
}

/// Body of `POST /v1/events`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEvent {
    pub link: String,
    pub state: LinkStatus,
}

async fn event(
    State(app): State<AppState>,
    body: Bytes,
) -> Result<Json<serde_json::Value>, ApiError> {
    let ev: LinkEvent = parse(&body)?;
    app.drain();
    let changed = app
        .engine()
        .set_link_state(&foglet_core::model::LinkId::new(ev.link.as_str()), ev.state)?;
    Ok(Json(
        json!({ "link": ev.link, "state": ev.state, "changed": changed }),
    ))
}

/// Body of `POST /v1/clock/advance`. Exactly one field must be given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvanceBody {
    #[serde(default)]
    pub ms: Option<u64>,
    #[serde(default)]
    pub seconds: Option<f64>,
}

async fn advance(
    State(app): State<AppState>,
    body: Bytes,
) -> Result<Json<serde_json::Value>, ApiError> {
    let b: AdvanceBody = parse(&body)?;
    let ms = match (b.ms, b.seconds) {
        (Some(ms), None) => ms,
        (None, Some(s)) if s.is_finite() && s >= 0.0 && (s * 1000.0).fract() == 0.0 => {
            (s * 1000.0) as u64
        }
        (None, Some(s)) => {
            return Err(ApiError::bad_body(format!(
                "seconds must be a non-negative whole number of ms, got {s}"
            )))
        }
        _ => return Err(ApiError::bad_body("give exactly one of `ms` or `seconds`")),
    };
    app.drain();
    let mut engine = app.engine();
    engine.advance(ms);
    Ok(Json(json!({ "now_ms": engine.now().millis() })))
}

async fn report(State(app): State<AppState>) -> Json<foglet_core::flowsim::MetricsReport> {
    Json(app.engine().report())
}
