//! Local HTTP API consumed by the dashboard.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use privflow_core::inference::{reach_set, FlowGraph};
use privflow_core::kb::EntityKind;
use privflow_core::nudge::NudgeError;
use privflow_core::preference::{Action, PreferenceProfile};
use serde::Deserialize;
use serde_json::json;

use crate::error::ServiceError;
use crate::ingest::{resolve, DisclosureDoc, EntityRef, IngestDoc};
use crate::log::ProfileChangeReason;
use crate::store::Store;

pub type Clock = Arc<dyn Fn() -> i64 + Send + Sync>;

#[derive(Clone)]
pub struct AppState {
    store: Arc<Mutex<Store>>,
    clock: Clock,
}

impl AppState {
    pub fn new(store: Store, clock: Clock) -> Self {
        AppState {
            store: Arc::new(Mutex::new(store)),
            clock,
        }
    }

    pub fn system_clock() -> Clock {
        Arc::new(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs() as i64)
        })
    }

    fn lock(&self) -> MutexGuard<'_, Store> {
        // A panic mid-command never leaves a half-applied engine behind (see
        // Store::commit), so a poisoned lock is still safe to use.
        self.store.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn now(&self) -> i64 {
        (self.clock)()
    }
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl From<serde_json::Error> for ApiError {
    fn from(e: serde_json::Error) -> Self {
        ApiError(e.into())
    }
}

impl From<privflow_core::inference::InferenceError> for ApiError {
    fn from(e: privflow_core::inference::InferenceError) -> Self {
        ApiError(e.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self.0 {
            ServiceError::Parse(_) => (StatusCode::BAD_REQUEST, "ParseError"),
            ServiceError::UnknownEntityRef { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "UnknownEntityRef"),
            ServiceError::NotFound { .. } => (StatusCode::NOT_FOUND, "NotFound"),
            ServiceError::Nudge(NudgeError::InvalidOption { .. }) => (StatusCode::UNPROCESSABLE_ENTITY, "InvalidOption"),
            ServiceError::Nudge(NudgeError::UnshownParent(_)) => (StatusCode::CONFLICT, "UnshownParent"),
            ServiceError::Nudge(NudgeError::NotLevelOne(_)) => (StatusCode::UNPROCESSABLE_ENTITY, "NotLevelOne"),
            ServiceError::Inference(_) => (StatusCode::UNPROCESSABLE_ENTITY, "InferenceError"),
            ServiceError::Preference(_) => (StatusCode::UNPROCESSABLE_ENTITY, "InvalidProfile"),
            e if e.is_client_error() => (StatusCode::UNPROCESSABLE_ENTITY, "InvalidRequest"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "InternalError"),
        };
        (status, Json(json!({ "error": kind, "message": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/services", get(services))
        .route("/issues", get(issues))
        .route("/issues/{id}", get(issue))
        .route("/nudges/level1", get(level1))
        .route("/nudges/{id}/level2", get(level2))
        .route("/nudges/{id}/action", post(action))
        .route("/events/disclosure", post(disclosure))
        .route("/events/behavior", post(behavior))
        .route("/profile", get(profile).put(put_profile))
        .route("/flows", get(flows))
        .route("/graph", get(graph))
        .route("/report", get(report))
        .with_state(state)
}

async fn services(State(s): State<AppState>) -> ApiResult<serde_json::Value> {
    Ok(Json(serde_json::to_value(s.lock().engine().reports())?))
}

async fn issues(State(s): State<AppState>) -> ApiResult<serde_json::Value> {
    Ok(Json(serde_json::to_value(s.lock().engine().issues())?))
}

async fn issue(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<serde_json::Value> {
    let store = s.lock();
    let issue = store
        .engine()
        .issue(&id)
        .ok_or(ServiceError::NotFound { what: "issue", id: id.clone() })?;
    Ok(Json(serde_json::to_value(issue)?))
}

async fn level1(State(s): State<AppState>) -> ApiResult<serde_json::Value> {
    let now = s.now();
    let cards = s.lock().show_level1(now)?;
    Ok(Json(serde_json::to_value(cards)?))
}

#[derive(Deserialize)]
struct Level2Query {
    issue: Option<String>,
}

async fn level2(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<Level2Query>,
) -> ApiResult<serde_json::Value> {
    let now = s.now();
    let nudge = s.lock().level2(&id, q.issue.as_deref(), now)?;
    Ok(Json(serde_json::to_value(nudge)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionBody {
    action: Action,
}

async fn action(State(s): State<AppState>, Path(id): Path<String>, body: String) -> ApiResult<serde_json::Value> {
    let body: ActionBody = serde_json::from_str(&body)?;
    let now = s.now();
    let event = s.lock().act(&id, body.action, now)?;
    Ok(Json(serde_json::to_value(event)?))
}

async fn disclosure(State(s): State<AppState>, body: String) -> ApiResult<serde_json::Value> {
    let doc: DisclosureDoc = serde_json::from_str(&body)?;
    let now = s.now();
    let seq = s.lock().ingest_doc(IngestDoc::Disclosure(doc), now)?;
    Ok(Json(json!({ "seq": seq })))
}

async fn behavior(State(s): State<AppState>, body: String) -> ApiResult<serde_json::Value> {
    let doc = serde_json::from_str(&body)?;
    let now = s.now();
    let seq = s.lock().ingest_doc(IngestDoc::Behavior(doc), now)?;
    Ok(Json(json!({ "seq": seq })))
}

async fn profile(State(s): State<AppState>) -> ApiResult<PreferenceProfile> {
    Ok(Json(s.lock().engine().profile().clone()))
}

async fn put_profile(State(s): State<AppState>, body: String) -> ApiResult<serde_json::Value> {
    let profile: PreferenceProfile = serde_json::from_str(&body)?;
    let now = s.now();
    let seq = s.lock().set_profile(profile, ProfileChangeReason::Manual, now)?;
    Ok(Json(json!({ "seq": seq })))
}

#[derive(Deserialize)]
struct FlowsQuery {
    item: String,
}

async fn flows(State(s): State<AppState>, Query(q): Query<FlowsQuery>) -> ApiResult<serde_json::Value> {
    let store = s.lock();
    let engine = store.engine();
    let reference = match q.item.parse::<u32>() {
        Ok(n) => EntityRef::Id(n),
        Err(_) => EntityRef::Name(q.item.clone()),
    };
    let item = resolve(engine.kb(), &reference, "item", EntityKind::Data)?;
    let reach = reach_set(engine.kb(), engine.flows(), item)?;
    Ok(Json(serde_json::to_value(reach)?))
}

async fn graph(State(s): State<AppState>) -> ApiResult<FlowGraph> {
    let store = s.lock();
    Ok(Json(FlowGraph::build(store.engine().kb(), store.engine().flows())))
}

async fn report(State(s): State<AppState>) -> ApiResult<serde_json::Value> {
    Ok(Json(serde_json::to_value(s.lock().report())?))
}

/// Refuse anything but loopback unless explicitly allowed.
pub fn check_bind(addr: SocketAddr, allow_remote: bool) -> Result<(), ServiceError> {
    if addr.ip().is_loopback() || allow_remote {
        Ok(())
    } else {
        Err(ServiceError::NonLoopback(addr))
    }
}

pub async fn serve(state: AppState, addr: SocketAddr, allow_remote: bool) -> Result<(), ServiceError> {
    check_bind(addr, allow_remote)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
