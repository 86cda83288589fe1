//! Local HTTP API over evaluation sessions, for interactive solvers.
//!
//! Endpoints:
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/sessions` | `{task_id, budget?, agent?}` |
//! | GET | `/sessions/{id}` | |
//! | POST | `/sessions/{id}/tools/{name}` | tool arguments |
//! | POST | `/sessions/{id}/submit` | `{body, unit_id?}` |
//! | DELETE | `/sessions/{id}` | |
//! | GET | `/tasks` | |
//! | GET | `/tasks/{id}` | |
//!
//! Errors are `{code, message}` with an HTTP status derived from the code.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Mutex as AsyncMutex;

use faultline::evalcore::{
    open_session, tool_specs, write_trajectory, BudgetConfig, Clock, EvalError, Outcome, RecordedCall, Session,
    SessionOptions, SessionState, ToolSpec, Trajectory,
};
use faultline::harness::{RunnerConfig, SuiteReport};
use faultline::pipeline::Store;
use faultline::taskgen::{TaskInstance, TaskMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusyPolicy {
    /// A second concurrent request on one session gets 409.
    #[default]
    Reject,
    /// A second concurrent request waits for the first.
    Wait,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Task store written by `generate`.
    pub store: PathBuf,
    /// Pristine repository the tasks were generated from.
    pub source_root: PathBuf,
    pub runner: RunnerConfig,
    pub read_threshold: usize,
    pub clock: Clock,
    pub default_budget: String,
    pub idle_timeout: Duration,
    pub busy: BusyPolicy,
}

impl ServiceConfig {
    pub fn new(store: impl Into<PathBuf>, source_root: impl Into<PathBuf>) -> Self {
        Self {
            store: store.into(),
            source_root: source_root.into(),
            runner: RunnerConfig::default(),
            read_threshold: faultline::evalcore::DEFAULT_READ_THRESHOLD,
            clock: Clock::Wall,
            default_budget: "default".into(),
            idle_timeout: Duration::from_secs(2 * 60 * 60),
            busy: BusyPolicy::Reject,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    Eval(#[from] EvalError),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("session {0} is handling another request")]
    Busy(String),
    #[error("the task store is locked by a writer")]
    StoreLocked,
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::Eval(e) => e.code(),
            ApiError::UnknownSession(_) => "unknown_session",
            ApiError::UnknownTask(_) => "unknown_task",
            ApiError::Busy(_) => "session_busy",
            ApiError::StoreLocked => "store_locked",
            ApiError::BadRequest(_) => "bad_request",
            ApiError::Internal(_) => "internal",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Eval(e) => match e {
                EvalError::BudgetExhausted | EvalError::AttemptsExhausted | EvalError::SessionClosed(_) => StatusCode::GONE,
                EvalError::NotFound(_) | EvalError::UnknownUnit(_) => StatusCode::NOT_FOUND,
                EvalError::PathOutsideSandbox(_)
                | EvalError::InvalidPattern(_)
                | EvalError::UnparseableBody(_)
                | EvalError::InvalidArguments(_)
                | EvalError::WrongMode { .. }
                | EvalError::TargetMismatch(_)
                | EvalError::InvalidBudget(_) => StatusCode::BAD_REQUEST,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            },
            ApiError::UnknownSession(_) | ApiError::UnknownTask(_) => StatusCode::NOT_FOUND,
            ApiError::Busy(_) | ApiError::StoreLocked => StatusCode::CONFLICT,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(json!({"code": self.code(), "message": self.to_string()}))).into_response()
    }
}

struct Slot {
    session: Session,
    agent: String,
    calls: Vec<RecordedCall>,
    /// Final trajectory once closed; closing again returns it unchanged.
    closed: Option<Trajectory>,
}

struct Entry {
    slot: Arc<AsyncMutex<Slot>>,
    last_used: Mutex<Instant>,
}

/// Shared service state.
pub struct AppState {
    config: ServiceConfig,
    store: Store,
    sessions: Mutex<HashMap<String, Arc<Entry>>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Arc<Self> {
        Arc::new(Self {
            store: Store::new(&config.store),
            config,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    fn entry(&self, id: &str) -> Result<Arc<Entry>, ApiError> {
        let entry = self
            .sessions
            .lock()
            .expect("session map")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownSession(id.to_string()))?;
        *entry.last_used.lock().expect("clock") = Instant::now();
        Ok(entry)
    }

    async fn lock(&self, id: &str) -> Result<tokio::sync::OwnedMutexGuard<Slot>, ApiError> {
        let entry = self.entry(id)?;
        match self.config.busy {
            BusyPolicy::Reject => entry.slot.clone().try_lock_owned().map_err(|_| ApiError::Busy(id.to_string())),
            BusyPolicy::Wait => Ok(entry.slot.clone().lock_owned().await),
        }
    }

    fn load_task(&self, id: &str) -> Result<TaskInstance, ApiError> {
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(ApiError::UnknownTask(id.to_string()));
        }
        let path = faultline::taskgen::task_path(&self.store.root, id);
        if !path.is_file() {
            return Err(ApiError::UnknownTask(id.to_string()));
        }
        faultline::taskgen::read_task(&path).map_err(|e| ApiError::Internal(e.to_string()))
    }

    fn baseline(&self) -> Result<SuiteReport, ApiError> {
        self.store.load_baseline().map_err(|e| ApiError::Internal(e.to_string()))
    }

    /// Closes and persists every session idle for longer than the timeout.
    /// Returns the ids that expired.
    pub async fn expire_idle(&self, now: Instant) -> Vec<String> {
        let stale: Vec<(String, Arc<Entry>)> = self
            .sessions
            .lock()
            .expect("session map")
            .iter()
            .filter(|(_, e)| now.saturating_duration_since(*e.last_used.lock().expect("clock")) >= self.config.idle_timeout)
            .map(|(id, e)| (id.clone(), e.clone()))
            .collect();
        let mut expired = Vec::new();
        for (id, entry) in stale {
            let mut slot = entry.slot.clone().lock_owned().await;
            if slot.closed.is_none() {
                if let Err(e) = self.finish(&mut slot, "idle_expired") {
                    log::error!("could not persist expired session {id}: {e}");
                }
            }
            self.sessions.lock().expect("session map").remove(&id);
            expired.push(id);
        }
        expired
    }

    fn finish(&self, slot: &mut Slot, reason: &str) -> Result<Trajectory, ApiError> {
        if let Some(t) = &slot.closed {
            return Ok(t.clone());
        }
        let mut trajectory = slot.session.finish(Some(reason.to_string()));
        trajectory.calls = slot.calls.clone();
        let dir = self
            .store
            .trajectory_dir(&trajectory.outcome.agent, &trajectory.outcome.task_id);
        write_trajectory(&dir, &trajectory)?;
        slot.closed = Some(trajectory.clone());
        Ok(trajectory)
    }
}

/// Budget counters and state, attached to every session response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub session_id: String,
    pub state: SessionState,
    pub used_tools: usize,
    pub used_attempts: usize,
    pub remaining_tools: usize,
    pub remaining_attempts: usize,
}

fn status(s: &Session) -> SessionStatus {
    SessionStatus {
        session_id: s.id().to_string(),
        state: s.state(),
        used_tools: s.used_tools(),
        used_attempts: s.used_attempts(),
        remaining_tools: s.remaining_tools(),
        remaining_attempts: s.remaining_attempts(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub task_id: String,
    /// Budget preset or `tools/attempts`.
    #[serde(default)]
    pub budget: Option<String>,
    /// Label for the trajectory directory.
    #[serde(default)]
    pub agent: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub status: SessionStatus,
    pub task_id: String,
    pub mode: TaskMode,
    pub agent: String,
    pub budget: BudgetConfig,
    pub description: String,
    pub tools: Vec<ToolSpec>,
    /// Bodies submitted so far, per unit.
    pub edits: Value,
    pub events: Value,
    pub outcome: Option<Outcome>,
}

fn view(slot: &Slot, agent: &str) -> SessionView {
    let s = &slot.session;
    SessionView {
        status: status(s),
        task_id: s.task().task_id.clone(),
        mode: s.mode(),
        agent: agent.to_string(),
        budget: s.budget(),
        description: s.description(),
        tools: tool_specs(s.mode()),
        edits: serde_json::to_value(s.edits()).expect("edits serialize"),
        events: serde_json::to_value(s.events()).expect("events serialize"),
        outcome: slot.closed.as_ref().map(|t| t.outcome.clone()),
    }
}

fn new_session_id() -> String {
    let mut bytes = [0u8; 16];
    rand::thread_rng().fill_bytes(&mut bytes);
    hex::encode(bytes)
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    if state.store.is_locked() {
        return Err(ApiError::StoreLocked);
    }
    let task = state.load_task(&req.task_id)?;
    let budget = BudgetConfig::preset(req.budget.as_deref().unwrap_or(&state.config.default_budget))?;
    let baseline = state.baseline()?;
    let agent = req.agent.unwrap_or_else(|| "human".into());
    let options = SessionOptions {
        runner: state.config.runner.clone(),
        read_threshold: state.config.read_threshold,
        clock: state.config.clock,
        session_id: Some(new_session_id()),
        agent: agent.clone(),
    };
    let root = state.config.source_root.clone();
    let session = tokio::task::spawn_blocking(move || open_session(&task, &root, &baseline, budget, options))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    let id = session.id().to_string();
    let slot = Slot {
        session,
        agent: agent.clone(),
        calls: Vec::new(),
        closed: None,
    };
    let body = view(&slot, &agent);
    state.sessions.lock().expect("session map").insert(
        id,
        Arc::new(Entry {
            slot: Arc::new(AsyncMutex::new(slot)),
            last_used: Mutex::new(Instant::now()),
        }),
    );
    Ok((StatusCode::CREATED, Json(body)))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let slot = state.lock(&id).await?;
    Ok(Json(view(&slot, &slot.agent)))
}

#[derive(Debug, Serialize)]
struct ToolResponse {
    result: Value,
    #[serde(flatten)]
    status: SessionStatus,
}

async fn call_tool(state: &AppState, id: &str, tool: String, args: Value) -> Result<Json<ToolResponse>, ApiError> {
    let mut slot = state.lock(id).await?;
    if slot.closed.is_some() {
        return Err(EvalError::SessionClosed("closed".into()).into());
    }
    let (slot, result) = tokio::task::spawn_blocking(move || {
        slot.calls.push(RecordedCall {
            tool: tool.clone(),
            arguments: args.clone(),
        });
        let result = slot.session.invoke(&tool, &args);
        (slot, result)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?;
    let result = result?;
    Ok(Json(ToolResponse {
        result,
        status: status(&slot.session),
    }))
}

async fn invoke_tool(
    State(state): State<Arc<AppState>>,
    Path((id, tool)): Path<(String, String)>,
    body: Option<Json<Value>>,
) -> Result<Json<ToolResponse>, ApiError> {
    let args = body.map_or_else(|| json!({}), |Json(v)| v);
    call_tool(&state, &id, tool, args).await
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitRequest {
    pub body: String,
    #[serde(default)]
    pub unit_id: Option<String>,
}

async fn submit(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<SubmitRequest>,
) -> Result<Json<ToolResponse>, ApiError> {
    let mode = state.lock(&id).await?.session.mode();
    let (tool, args) = match (mode, req.unit_id) {
        (TaskMode::Remove, None) => ("submit_attempt", json!({"body": req.body})),
        (TaskMode::Remove, Some(unit)) => ("submit_attempt", json!({"body": req.body, "unit_id": unit})),
        (TaskMode::Discovery, Some(unit)) => ("replace_function", json!({"unit_id": unit, "body": req.body})),
        (TaskMode::Discovery, None) => {
            return Err(ApiError::BadRequest("discovery-mode submissions need unit_id".into()))
        }
    };
    call_tool(&state, &id, tool.into(), args).await
}

async fn close_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Outcome>, ApiError> {
    let mut slot = state.lock(&id).await?;
    let state2 = state.clone();
    let (_, trajectory) = tokio::task::spawn_blocking(move || {
        let t = state2.finish(&mut slot, "closed");
        (slot, t)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(Json(trajectory?.outcome))
}

/// Task listing entry; discovery-mode targets are never included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task_id: String,
    pub mode: TaskMode,
    pub failing_count: usize,
    /// Remove-mode target; `None` in discovery mode.
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskView {
    #[serde(flatten)]
    pub summary: TaskSummary,
    pub failing_tests: Vec<String>,
    pub description: String,
}

fn summarize(t: &TaskInstance) -> TaskSummary {
    TaskSummary {
        task_id: t.task_id.clone(),
        mode: t.mode,
        failing_count: t.failing_tests.len(),
        target: (t.mode == TaskMode::Remove).then(|| t.corruptions[0].target.to_string()),
    }
}

async fn list_tasks(State(state): State<Arc<AppState>>) -> Result<Json<Vec<TaskSummary>>, ApiError> {
    let tasks = state.store.load_tasks().map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(Json(tasks.iter().map(summarize).collect()))
}

async fn get_task(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<TaskView>, ApiError> {
    let task = state.load_task(&id)?;
    Ok(Json(TaskView {
        summary: summarize(&task),
        failing_tests: task.failing_tests.clone(),
        description: faultline::evalcore::task_description(&task),
    }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(close_session))
        .route("/sessions/{id}/tools/{name}", post(invoke_tool))
        .route("/sessions/{id}/submit", post(submit))
        .route("/tasks", get(list_tasks))
        .route("/tasks/{id}", get(get_task))
        .with_state(state)
}

/// Serves until the process is stopped, expiring idle sessions once a minute.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let state = AppState::new(config);
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            for id in sweeper.expire_idle(Instant::now()).await {
                log::info!("session {id} expired");
            }
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
