//! HTTP stepper service: one [`Machine`] per session, driven by JSON
//! requests. A human (or a test) plays the environment.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State as AxState};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::history::{Query, Round};
use crate::load::{load_program, load_scenario, load_state, LoadError};
use crate::runtime::scenario::Scenario;
use crate::runtime::{Event, Limits, Machine, Phase, RunEnd, RuntimeError, Status};
use crate::structures::Element;

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub program: String,
    #[serde(default)]
    pub state: String,
    pub scenario: Option<String>,
    pub max_steps: Option<usize>,
    pub max_rounds: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct Created {
    pub id: u64,
    pub status: Status,
}

#[derive(Debug, Deserialize)]
pub struct Reply {
    pub query: Query,
    pub value: Element,
}

#[derive(Debug, Deserialize)]
pub struct RoundRequest {
    pub replies: Vec<Reply>,
}

/// A delivery names a query and optionally the value; without a value the
/// session's scenario must have a due `afterstep` reply for it.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum Delivery {
    Query(Query),
    WithValue { query: Query, value: Option<Element> },
}

#[derive(Debug, Deserialize)]
pub struct BoundaryRequest {
    #[serde(default)]
    pub deliveries: Vec<Delivery>,
}

#[derive(Debug, Serialize)]
pub struct TraceResponse {
    pub text: String,
    pub events: Vec<Event>,
    pub end: Option<RunEnd>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

impl From<RuntimeError> for ApiError {
    fn from(e: RuntimeError) -> Self {
        let code = match e {
            RuntimeError::WrongPhase(_) => StatusCode::CONFLICT,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError(code, e.to_string())
    }
}

impl From<LoadError> for ApiError {
    fn from(e: LoadError) -> Self {
        ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
    }
}

struct Session {
    machine: Machine,
    scenario: Option<Scenario>,
}

#[derive(Default)]
pub struct Sessions {
    next_id: AtomicU64,
    sessions: Mutex<BTreeMap<u64, Arc<Mutex<Session>>>>,
}

type Shared = Arc<Sessions>;

impl Sessions {
    fn get(&self, id: u64) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .lock()
            .expect("session table poisoned")
            .get(&id)
            .cloned()
            .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no session {id}")))
    }
}

pub fn router() -> Router {
    Router::new()
        .route("/session", post(create))
        .route("/session/{id}", axum::routing::delete(remove))
        .route("/session/{id}/status", get(status))
        .route("/session/{id}/round", post(round))
        .route("/session/{id}/stuck", post(stuck))
        .route("/session/{id}/boundary", post(boundary))
        .route("/session/{id}/trace", get(trace))
        .with_state(Shared::default())
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn create(
    AxState(shared): AxState<Shared>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let program = load_program("program", &req.program)?;
    let state = load_state("state", &req.state, &program)?;
    let scenario = req
        .scenario
        .as_deref()
        .map(|text| load_scenario("scenario", text, &state))
        .transpose()?;
    let defaults = Limits::default();
    let limits = Limits {
        max_steps: req.max_steps.unwrap_or(defaults.max_steps),
        max_rounds: req.max_rounds.unwrap_or(defaults.max_rounds),
    };
    let mut machine = Machine::new(Arc::new(program), state, limits);
    machine.begin_step()?;
    let status = machine.status();
    let id = shared.next_id.fetch_add(1, Ordering::SeqCst) + 1;
    shared
        .sessions
        .lock()
        .expect("session table poisoned")
        .insert(id, Arc::new(Mutex::new(Session { machine, scenario })));
    Ok((StatusCode::CREATED, Json(Created { id, status })))
}

async fn remove(AxState(shared): AxState<Shared>, Path(id): Path<u64>) -> Result<StatusCode, ApiError> {
    shared.get(id)?;
    shared.sessions.lock().expect("session table poisoned").remove(&id);
    Ok(StatusCode::NO_CONTENT)
}

async fn status(AxState(shared): AxState<Shared>, Path(id): Path<u64>) -> Result<Json<Status>, ApiError> {
    let session = shared.get(id)?;
    let s = session.lock().expect("session poisoned");
    Ok(Json(s.machine.status()))
}

async fn round(
    AxState(shared): AxState<Shared>,
    Path(id): Path<u64>,
    Json(req): Json<RoundRequest>,
) -> Result<Json<Status>, ApiError> {
    let session = shared.get(id)?;
    let mut s = session.lock().expect("session poisoned");
    let mut round = Round::new();
    for r in req.replies {
        if round.insert(r.query.clone(), r.value).is_some() {
            return Err(ApiError(
                StatusCode::UNPROCESSABLE_ENTITY,
                format!("{} answered twice in one round", r.query),
            ));
        }
    }
    s.machine.post_round(round)?;
    Ok(Json(s.machine.status()))
}

async fn stuck(AxState(shared): AxState<Shared>, Path(id): Path<u64>) -> Result<Json<Status>, ApiError> {
    let session = shared.get(id)?;
    let mut s = session.lock().expect("session poisoned");
    s.machine.declare_stuck()?;
    Ok(Json(s.machine.status()))
}

/// Makes the requested deliveries, then starts the next step.
async fn boundary(
    AxState(shared): AxState<Shared>,
    Path(id): Path<u64>,
    Json(req): Json<BoundaryRequest>,
) -> Result<Json<Status>, ApiError> {
    let session = shared.get(id)?;
    let mut s = session.lock().expect("session poisoned");
    if s.machine.phase() != Phase::Boundary {
        return Err(RuntimeError::WrongPhase(s.machine.phase()).into());
    }
    let step = s.machine.step();
    let mut late = Vec::new();
    for d in req.deliveries {
        let (query, value) = match d {
            Delivery::Query(q) => (q, None),
            Delivery::WithValue { query, value } => (query, value),
        };
        let value = match value {
            Some(v) => v,
            None => s
                .scenario
                .as_ref()
                .and_then(|sc| sc.due_after(&query, step))
                .map(|(_, d)| d.reply.clone())
                .ok_or_else(|| RuntimeError::NoReply(query.clone()))?,
        };
        late.push((query, value));
    }
    s.machine.boundary(late)?;
    s.machine.begin_step()?;
    Ok(Json(s.machine.status()))
}

async fn trace(AxState(shared): AxState<Shared>, Path(id): Path<u64>) -> Result<Json<TraceResponse>, ApiError> {
    let session = shared.get(id)?;
    let s = session.lock().expect("session poisoned");
    let t = s.machine.trace();
    Ok(Json(TraceResponse {
        text: t.render(),
        events: t.events.clone(),
        end: t.end(),
    }))
}
