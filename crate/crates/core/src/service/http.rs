use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::Mutex;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{Config, Registry, ServiceError, Session};
use crate::csp::NetworkView;
use crate::explain::{available_transitions, PageId};
use crate::service::ActionRequest;

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
    }
}

/// Advances by a fixed step on every read; for tests and scripted runs.
#[derive(Debug)]
pub struct ManualClock {
    now: AtomicU64,
    step: u64,
}

impl ManualClock {
    pub fn new(start: u64, step: u64) -> Self {
        ManualClock { now: AtomicU64::new(start), step }
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.now.fetch_add(self.step, Ordering::SeqCst)
    }
}

/// Shared by every request. Each session has its own lock, so requests to
/// one session are serialized while different sessions proceed in parallel.
pub struct AppState {
    registry: Registry,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
    clock: Box<dyn Clock>,
    log_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(registry: Registry, clock: Box<dyn Clock>, log_dir: Option<PathBuf>) -> Self {
        AppState { registry, sessions: Mutex::new(HashMap::new()), next_id: AtomicU64::new(1), clock, log_dir }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions.lock().get(id).cloned().ok_or_else(|| ServiceError::SessionNotFound(id.to_string()))
    }

    pub fn create_session(&self, problem: &str, model: &str) -> Result<(String, NetworkView), ServiceError> {
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let session = self.registry.session(&id, problem, model)?;
        let view = session.network().view();
        if let Some(dir) = &self.log_dir {
            fs::create_dir_all(dir).map_err(|e| ServiceError::io(dir, e))?;
        }
        self.sessions.lock().insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok((id, view))
    }

    /// Runs `f` on one session under its lock, then appends any new log
    /// lines to the session's file.
    pub fn with_session<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Session, u64) -> Result<T, ServiceError>,
    ) -> Result<T, ServiceError> {
        let handle = self.session(id)?;
        let mut s = handle.lock();
        let before = s.lines().len();
        let out = f(&mut s, self.clock.now_ms())?;
        if let Some(dir) = &self.log_dir {
            let fresh = &s.lines()[before..];
            if !fresh.is_empty() {
                let path = dir.join(format!("{id}.jsonl"));
                let mut file =
                    OpenOptions::new().create(true).append(true).open(&path).map_err(|e| ServiceError::io(&path, e))?;
                for l in fresh {
                    let line = serde_json::to_string(l).expect("log lines serialize");
                    writeln!(file, "{line}").map_err(|e| ServiceError::io(&path, e))?;
                }
            }
        }
        Ok(out)
    }
}

fn status(e: &ServiceError) -> StatusCode {
    match e {
        ServiceError::SessionNotFound(_) | ServiceError::UnknownProblem(_) | ServiceError::UnknownModel(_) => {
            StatusCode::NOT_FOUND
        }
        ServiceError::Explain(crate::explain::ExplainError::UnknownPage(_)) => StatusCode::NOT_FOUND,
        ServiceError::InvalidRequest(_) | ServiceError::BadLogLine { .. } => StatusCode::BAD_REQUEST,
        ServiceError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::CONFLICT,
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code(), "message": self.to_string() } });
        (status(&self), Json(body)).into_response()
    }
}

type Shared = State<Arc<AppState>>;
type Reply = Result<Json<Value>, ServiceError>;

fn body<T>(b: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    b.map(|Json(v)| v).map_err(|e| ServiceError::InvalidRequest(e.body_text()))
}

fn to_json<T: serde::Serialize>(v: T) -> Reply {
    Ok(Json(serde_json::to_value(v).expect("responses serialize")))
}

#[derive(Deserialize)]
struct CreateSession {
    problem: String,
    model: String,
}

#[derive(Deserialize)]
struct Closed {
    dwell_ms: u64,
}

async fn create(
    State(app): Shared,
    b: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<Value>), ServiceError> {
    let body = body(b)?;
    let (session, network) = app.create_session(&body.problem, &body.model)?;
    Ok((StatusCode::CREATED, Json(json!({ "session": session, "network": network }))))
}

async fn problems(State(app): Shared) -> Reply {
    let list: Vec<Value> = app
        .registry
        .problems
        .iter()
        .map(|(id, n)| json!({ "id": id, "name": n.name(), "variables": n.variables().len(), "constraints": n.constraints().len() }))
        .collect();
    to_json(list)
}

async fn models(State(app): Shared) -> Reply {
    let list: Vec<Value> = app
        .registry
        .models
        .iter()
        .map(|(id, m)| json!({ "id": id, "rules": m.rules.len(), "totals": m.totals, "provenance": m.provenance }))
        .collect();
    to_json(list)
}

async fn action(State(app): Shared, Path(id): Path<String>, req: Result<Json<ActionRequest>, JsonRejection>) -> Reply {
    let req = body(req)?;
    to_json(app.with_session(&id, |s, now| s.post_action(&req, now))?)
}

fn page_id(raw: &str) -> Result<PageId, ServiceError> {
    Ok(raw.parse::<PageId>()?)
}

async fn explanation(State(app): Shared, Path((id, page)): Path<(String, String)>) -> Reply {
    let page = page_id(&page)?;
    to_json(app.with_session(&id, |s, now| s.explanation(page, now))?)
}

async fn closed(
    State(app): Shared,
    Path((id, page)): Path<(String, String)>,
    b: Result<Json<Closed>, JsonRejection>,
) -> Reply {
    let page = page_id(&page)?;
    let body = body(b)?;
    app.with_session(&id, |s, now| s.page_closed(page, body.dwell_ms, now))?;
    to_json(json!({ "ok": true }))
}

async fn feedback(State(app): Shared, Path((id, page)): Path<(String, String)>) -> Reply {
    let page = page_id(&page)?;
    app.with_session(&id, |s, now| s.feedback(page, now))?;
    to_json(json!({ "ok": true }))
}

async fn stats(State(app): Shared, Path(id): Path<String>) -> Reply {
    to_json(app.with_session(&id, |s, _| Ok(s.stats()))?)
}

async fn log(State(app): Shared, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let text = app.with_session(&id, |s, _| Ok(s.export_log()))?;
    Ok(([("content-type", "application/x-ndjson")], text).into_response())
}

async fn navigation() -> Reply {
    let graph: Vec<Value> = PageId::ALL
        .into_iter()
        .map(|p| json!({ "page": p, "transitions": available_transitions(p).into_iter().map(|(to, kind)| json!({ "to": to, "kind": kind })).collect::<Vec<_>>() }))
        .collect();
    to_json(graph)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/problems", get(problems))
        .route("/models", get(models))
        .route("/navigation", get(navigation))
        .route("/sessions/{id}/actions", post(action))
        .route("/sessions/{id}/explanations/{page}", get(explanation))
        .route("/sessions/{id}/explanations/{page}/closed", post(closed))
        .route("/sessions/{id}/explanations/{page}/feedback", post(feedback))
        .route("/sessions/{id}/stats", get(stats))
        .route("/sessions/{id}/log", get(log))
        .with_state(state)
}

/// Binds `config.listen` and serves until interrupted.
pub async fn serve(config: Config) -> Result<(), ServiceError> {
    let registry = config.registry()?;
    let state = Arc::new(AppState::new(registry, Box::new(SystemClock), config.log_dir.clone()));
    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .map_err(|e| ServiceError::io(std::path::Path::new(&config.listen.to_string()), e))?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServiceError::io(std::path::Path::new("serve"), e))
}
