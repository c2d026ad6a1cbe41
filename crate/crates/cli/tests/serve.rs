use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;
use tslagent_cli::serve::router;
use tslagent_cli::serve_state;
use tslagent_cli::setup::{BackendArgs, FaultArgs};

fn synth(dir: &Path, spec: &str) -> PathBuf {
    let out = dir.join(format!("{spec}.automaton.json"));
    let code = tslagent_cli::main_with(["tslagent", "synth", spec, "-o", &out.to_string_lossy()].map(Into::into), &mut &b""[..], &mut Vec::new(), &mut Vec::new());
    assert_eq!(code, 0);
    out
}

struct Server {
    app: Router,
    _dir: TempDir,
    dir: PathBuf,
}

fn server(spec: &str, bindings: &str, faults: FaultArgs, backend: BackendArgs) -> Server {
    let dir = TempDir::new().unwrap();
    let artifact = synth(dir.path(), spec);
    let persist = dir.path().join("sessions");
    let state = serve_state(&artifact, Path::new(bindings), Some(Path::new(spec)), Some(persist), faults, &backend).unwrap();
    Server { app: router(Arc::new(state)), dir: dir.path().to_path_buf(), _dir: dir }
}

fn scripted(spec: &str) -> Server {
    server(spec, &format!("{spec}.scripted"), FaultArgs::default(), BackendArgs::default())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() })
}

async fn new_session(app: &Router, seed: u64) -> String {
    let (status, v) = call(app, "POST", "/sessions", Some(json!({ "artifact_id": "task1", "seed": seed }))).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

async fn turn(app: &Router, id: &str, prompt: &str) -> (StatusCode, Value) {
    call(app, "POST", &format!("/sessions/{id}/turns"), Some(json!({ "user_prompt": prompt }))).await
}

#[tokio::test]
async fn session_lifecycle() {
    let s = scripted("task1");
    let id = new_session(&s.app, 7).await;
    let (_, fresh) = call(&s.app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!((fresh["state"].as_u64(), fresh["turn"].as_u64(), fresh["summary"].as_str()), (Some(0), Some(0), Some("")));
    assert_eq!(fresh["trace"], json!([]));

    let mut last = Value::Null;
    for (k, prompt) in ["look around", "walk on", "go into the cave"].iter().enumerate() {
        let (status, r) = turn(&s.app, &id, prompt).await;
        assert_eq!(status, StatusCode::OK, "{r}");
        assert_eq!(r["turn"], k + 1);
        assert_eq!(r["user_prompt"], *prompt);
        assert!(r["edge"].as_str().unwrap().starts_with(&format!("{}.", r["state"])));
        last = r;
    }
    assert_eq!(last["updates"]["storyPassage"], "toCave(s)");
    assert!(last["passage"].as_str().unwrap().contains("cave"));

    let (status, view) = call(&s.app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["turn"], 3);
    assert_eq!(view["state"], last["next_state"]);
    assert_eq!(view["trace"].as_array().unwrap().len(), 3);
    assert_eq!(view["trace"][2]["passage"], last["passage"]);
    let verdicts = view["verdicts"].as_array().unwrap();
    assert!(!verdicts.is_empty());
    assert!(verdicts.iter().all(|v| v["status"] != "violated"), "{verdicts:?}");

    let persisted = fs::read_to_string(s.dir.join("sessions").join(format!("{id}.jsonl"))).unwrap();
    assert_eq!(persisted.lines().count(), 3);
}

#[tokio::test]
async fn same_seed_same_story() {
    let s = scripted("task1");
    let (a, b) = (new_session(&s.app, 11).await, new_session(&s.app, 11).await);
    assert_ne!(a, b);
    for prompt in ["[safe] rest", "go on", "run"] {
        let (_, x) = turn(&s.app, &a, prompt).await;
        let (_, y) = turn(&s.app, &b, prompt).await;
        assert_eq!(x["passage"], y["passage"]);
        assert_eq!(x["next_state"], y["next_state"]);
    }
}

#[tokio::test]
async fn graph_matches_artifact() {
    let s = scripted("task1");
    let (status, g) = call(&s.app, "GET", "/artifacts/task1/graph", None).await;
    assert_eq!(status, StatusCode::OK);
    let nodes = g["nodes"].as_array().unwrap();
    let edges = g["edges"].as_array().unwrap();
    assert_eq!(nodes.len(), 2);
    assert_eq!(nodes[0]["initial"], true);
    assert_eq!(nodes[0]["layer"], 0);
    assert!(edges.iter().all(|e| e["from"].as_u64().unwrap() < 2 && e["to"].as_u64().unwrap() < 2));
    assert!(edges.iter().any(|e| e["updates"]["storyPassage"] == "toCave(s)"));

    let id = new_session(&s.app, 1).await;
    let (_, r) = turn(&s.app, &id, "hello").await;
    let taken = edges.iter().find(|e| e["id"] == r["edge"]).unwrap();
    assert_eq!(taken["from"], r["state"]);
    assert_eq!(taken["to"], r["next_state"]);
    for (signal, term) in taken["updates"].as_object().unwrap() {
        assert_eq!(&r["updates"][signal], term);
    }
}

#[tokio::test]
async fn bad_requests() {
    let s = scripted("task1");
    assert_eq!(call(&s.app, "GET", "/sessions/nope", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(turn(&s.app, "nope", "hi").await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&s.app, "GET", "/artifacts/other/graph", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&s.app, "POST", "/sessions", Some(json!({ "artifact_id": "other" }))).await.0, StatusCode::NOT_FOUND);
    let (status, v) = call(&s.app, "POST", "/sessions", Some(json!({ "seed": "x" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "bad_request");
    // A single served artifact is the default.
    let (status, v) = call(&s.app, "POST", "/sessions", Some(json!({ "seed": 3 }))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(v["artifact_id"], "task1");
    let (status, _) = call(&s.app, "POST", "/sessions", Some(json!({ "artifact-id": "task1", "seed": 3 }))).await;
    assert_eq!(status, StatusCode::CREATED);
}

#[tokio::test]
async fn oracle_failure_is_a_gateway_error_and_changes_nothing() {
    let backend = BackendArgs { base_url: Some("http://127.0.0.1:9/v1".into()), ..BackendArgs::default() };
    let s = server("task1", "task1.llm", FaultArgs::default(), backend);
    let id = new_session(&s.app, 1).await;
    let (status, v) = turn(&s.app, &id, "hi").await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(v["error"], "oracle");
    assert_eq!(v["exit_code"], 5);
    assert_eq!(v["detail"]["error"], "transport");
    let (_, view) = call(&s.app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(view["turn"], 0);
}

#[tokio::test]
async fn injected_hallucination_flips_a_verdict() {
    let s = server("task1", "task1.scripted", FaultArgs { p_halluc: 1.0, p_arith: 0.0 }, BackendArgs::default());
    let id = new_session(&s.app, 5).await;
    let mut flipped = None;
    for k in 1..=4 {
        let (_, r) = turn(&s.app, &id, "go").await;
        assert!(!r["faults"].as_array().unwrap().is_empty());
        if let Some(v) = r["verdicts"].as_array().unwrap().iter().find(|v| v["status"] == "violated") {
            flipped = Some((k, v.clone()));
            break;
        }
    }
    let (k, v) = flipped.expect("a point-in-time conjunct is violated");
    assert_eq!(v["turn"], k);
    assert_eq!(v["class"], "hallucination");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn turns_on_one_session_are_queued() {
    let s = scripted("task1");
    let id = new_session(&s.app, 9).await;
    let other = new_session(&s.app, 9).await;
    let mut handles = Vec::new();
    for k in 0..12 {
        let (app, id) = (s.app.clone(), if k % 3 == 0 { other.clone() } else { id.clone() });
        handles.push(tokio::spawn(async move { turn(&app, &id, &format!("prompt {k}")).await }));
    }
    let mut turns = Vec::new();
    for h in handles {
        let (status, r) = h.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        if r["session_id"] == id.as_str() {
            turns.push(r["turn"].as_u64().unwrap());
        }
    }
    turns.sort();
    assert_eq!(turns, (1..=8).collect::<Vec<_>>());
    let (_, view) = call(&s.app, "GET", &format!("/sessions/{id}"), None).await;
    let trace = view["trace"].as_array().unwrap();
    assert_eq!(trace.len(), 8);
    for w in trace.windows(2) {
        assert_eq!(w[0]["next_state"], w[1]["state"], "turns chain through the machine");
    }
}
