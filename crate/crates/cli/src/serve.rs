//! JSON over HTTP for the browser client. Turns on one session are queued
//! behind a per-session lock; different sessions run concurrently.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json_};
use tokio::sync::Mutex as AsyncMutex;
use tslagent_core::abstraction::LtlSpec;
use tslagent_core::codegen::Artifact;
use tslagent_core::monitor::{Monitor, Role, Verdict, ViolationClass};
use tslagent_runtime::session::{start_session, Session, TurnResult};
use tslagent_runtime::TermRegistry;

use crate::setup::Backend;

pub struct Served {
    pub artifact: Artifact,
    pub registry: Arc<TermRegistry>,
    /// Enables per-conjunct verdicts when present.
    pub spec: Option<LtlSpec>,
}

pub struct AppState {
    artifacts: BTreeMap<String, Served>,
    backend: Backend,
    persist: Option<PathBuf>,
    sessions: Mutex<HashMap<String, Arc<AsyncMutex<Live>>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(artifacts: BTreeMap<String, Served>, backend: Backend, persist: Option<PathBuf>) -> AppState {
        AppState { artifacts, backend, persist, sessions: Mutex::new(HashMap::new()), next_id: AtomicU64::new(1) }
    }
}

struct Live {
    id: String,
    artifact_id: String,
    session: Session,
    monitor: Option<Monitor>,
}

#[derive(Debug, Serialize)]
struct ConjunctVerdict {
    conjunct: String,
    role: Role,
    class: ViolationClass,
    #[serde(flatten)]
    verdict: Verdict,
}

impl Live {
    fn verdicts(&self) -> Option<Vec<ConjunctVerdict>> {
        self.monitor.as_ref().map(|m| {
            m.tracks.iter().map(|t| ConjunctVerdict { conjunct: t.label.clone(), role: t.role, class: t.class, verdict: t.verdict }).collect()
        })
    }

    fn view(&self) -> Json_ {
        let s = &self.session;
        json!({
            "session_id": self.id,
            "artifact_id": self.artifact_id,
            "seed": s.seed(),
            "state": s.state(),
            "turn": s.turn(),
            "cells": s.cells(),
            "passage": s.passage(),
            "summary": s.summary(),
            "trace": s.trace(),
            "verdicts": self.verdicts(),
        })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/turns", post(take_turn))
        .route("/artifacts/{id}/graph", get(graph))
        .with_state(state)
}

struct ApiError(StatusCode, Json_);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

fn error(status: StatusCode, kind: &str, message: impl ToString) -> ApiError {
    ApiError(status, json!({ "error": kind, "message": message.to_string() }))
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(t)| t).map_err(|e| error(StatusCode::BAD_REQUEST, "bad_request", e.body_text()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewSession {
    /// May be omitted when only one artifact is served.
    #[serde(default, alias = "artifact-id")]
    artifact_id: Option<String>,
    #[serde(default)]
    seed: u64,
}

async fn create_session(State(app): State<Arc<AppState>>, payload: Result<Json<NewSession>, JsonRejection>) -> Result<(StatusCode, Json<Json_>), ApiError> {
    let req = body(payload)?;
    let artifact_id = match req.artifact_id {
        Some(id) => id,
        None if app.artifacts.len() == 1 => app.artifacts.keys().next().cloned().expect("one artifact"),
        None => return Err(error(StatusCode::BAD_REQUEST, "bad_request", "artifact_id is required")),
    };
    let Some(served) = app.artifacts.get(&artifact_id) else {
        return Err(error(StatusCode::NOT_FOUND, "not_found", format!("no artifact `{artifact_id}`")));
    };
    let id = format!("s{}", app.next_id.fetch_add(1, Ordering::Relaxed));
    let oracles = app.backend.oracles(&id).map_err(|e| error(StatusCode::INTERNAL_SERVER_ERROR, "oracle", e))?;
    let session = start_session(&served.artifact, served.registry.clone(), req.seed, BTreeMap::new(), oracles)
        .map_err(|e| error(StatusCode::UNPROCESSABLE_ENTITY, "session", e))?;
    let monitor = match &served.spec {
        Some(spec) => Some(Monitor::new(spec).map_err(|e| error(StatusCode::INTERNAL_SERVER_ERROR, "monitor", e))?),
        None => None,
    };
    let live = Live { id: id.clone(), artifact_id, session, monitor };
    let view = live.view();
    app.sessions.lock().expect("session table").insert(id, Arc::new(AsyncMutex::new(live)));
    Ok((StatusCode::CREATED, Json(view)))
}

fn lookup(app: &AppState, id: &str) -> Result<Arc<AsyncMutex<Live>>, ApiError> {
    app.sessions.lock().expect("session table").get(id).cloned().ok_or_else(|| error(StatusCode::NOT_FOUND, "not_found", format!("no session `{id}`")))
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Json_>, ApiError> {
    let live = lookup(&app, &id)?;
    let guard = live.lock().await;
    Ok(Json(guard.view()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewTurn {
    #[serde(default)]
    user_prompt: String,
}

#[derive(Debug, Serialize)]
struct TurnView {
    session_id: String,
    #[serde(flatten)]
    result: TurnResult,
    /// Edge of the artifact graph taken this turn.
    edge: String,
    verdicts: Option<Vec<ConjunctVerdict>>,
}

async fn take_turn(State(app): State<Arc<AppState>>, Path(id): Path<String>, payload: Result<Json<NewTurn>, JsonRejection>) -> Result<Json<TurnView>, ApiError> {
    let req = body(payload)?;
    let live = lookup(&app, &id)?;
    let mut guard = live.lock_owned().await;
    let persist = app.persist.clone();
    let app2 = app.clone();
    // Oracle calls block on the network.
    let outcome = tokio::task::spawn_blocking(move || {
        let live = &mut *guard;
        let result = live.session.step_turn(&req.user_prompt)?;
        if let Some(m) = &mut live.monitor {
            m.observe(result.letter);
        }
        let served = &app2.artifacts[&live.artifact_id];
        let edge = edge_of(&served.artifact, &result);
        if let Some(dir) = persist {
            let line = serde_json::to_string(&result).expect("turn serializes");
            let path = dir.join(format!("{}.jsonl", live.id));
            let written = OpenOptions::new().create(true).append(true).open(&path).and_then(|mut f| writeln!(f, "{line}"));
            if let Err(e) = written {
                eprintln!("persisting {}: {e}", path.display());
            }
        }
        Ok(TurnView { session_id: live.id.clone(), result, edge, verdicts: live.verdicts() })
    })
    .await
    .map_err(|e| error(StatusCode::INTERNAL_SERVER_ERROR, "internal", e))?;
    outcome.map(Json).map_err(|e: tslagent_runtime::TurnError| {
        ApiError(StatusCode::BAD_GATEWAY, json!({ "error": "oracle", "exit_code": 5, "message": e.to_string(), "detail": e.error, "transcripts": e.transcripts }))
    })
}

fn edge_id(state: usize, k: usize) -> String {
    format!("{state}.{k}")
}

fn edge_of(artifact: &Artifact, r: &TurnResult) -> String {
    let k = artifact.states[r.state]
        .transitions
        .iter()
        .position(|t| t.guard.iter().all(|l| r.valuation.get(artifact.input_term(&l.prop).unwrap_or(&l.prop)).copied().unwrap_or(false) == l.value))
        .unwrap_or(0);
    edge_id(r.state, k)
}

async fn graph(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Json_>, ApiError> {
    let served = app.artifacts.get(&id).ok_or_else(|| error(StatusCode::NOT_FOUND, "not_found", format!("no artifact `{id}`")))?;
    Ok(Json(graph_json(&id, &served.artifact)))
}

/// Nodes carry their breadth-first depth from the initial state as a layer.
pub fn graph_json(id: &str, a: &Artifact) -> Json_ {
    let mut layer = vec![None; a.states.len()];
    layer[a.initial] = Some(0);
    let mut queue = VecDeque::from([a.initial]);
    while let Some(s) = queue.pop_front() {
        for t in &a.states[s].transitions {
            if layer[t.next].is_none() {
                layer[t.next] = Some(layer[s].expect("visited") + 1);
                queue.push_back(t.next);
            }
        }
    }
    let term = |prop: &str| a.input_term(prop).unwrap_or(prop).to_string();
    let nodes: Vec<Json_> = a.states.iter().map(|s| json!({ "id": s.id, "label": format!("q{}", s.id), "initial": s.id == a.initial, "layer": layer[s.id] })).collect();
    let edges: Vec<Json_> = a
        .states
        .iter()
        .flat_map(|s| {
            s.transitions.iter().enumerate().map(move |(k, t)| {
                let guard: Vec<String> = t.guard.iter().map(|l| if l.value { term(&l.prop) } else { format!("!{}", term(&l.prop)) }).collect();
                json!({
                    "id": edge_id(s.id, k),
                    "from": s.id,
                    "to": t.next,
                    "guard": if guard.is_empty() { "true".to_string() } else { guard.join(" && ") },
                    "updates": t.updates,
                })
            })
        })
        .collect();
    json!({ "id": id, "initial": a.initial, "inputs": a.inputs, "outputs": a.outputs, "nodes": nodes, "edges": edges })
}
