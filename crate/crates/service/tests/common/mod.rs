#![allow(dead_code)]

use std::path::PathBuf;
use std::time::{Duration, Instant};

use amaze_core::trainer::Decision;
use amaze_core::MazeSpec;
use amaze_service::{router, AppState};
use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub fn golden(name: &str, actual: &[u8]) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("AMAZE_UPDATE_GOLDEN").is_some() || !path.exists() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read(&path).unwrap();
    assert!(
        expected == actual,
        "golden mismatch for {name}\n--- expected\n{}\n--- actual\n{}",
        String::from_utf8_lossy(&expected),
        String::from_utf8_lossy(actual)
    );
}

pub fn app(dir: &std::path::Path) -> Router {
    router(AppState::open(dir).unwrap())
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call_raw(app, method, uri, body, None).await;
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

pub async fn call_raw(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
    accept: Option<&str>,
) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(a) = accept {
        req = req.header(header::ACCEPT, a);
    }
    let req = match body {
        Some(b) => req
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

/// Small deterministic configuration: K = 3, S = 10, 1000 steps per candidate.
pub fn small_request() -> Value {
    json!({
        "k": 3,
        "stages": 10,
        "budget": 30_000,
        "initial": MazeSpec::new(5, 5, 1).unicursive().descriptor(),
        "seed": 7,
        "clock": "logical",
    })
}

/// The scripted answer given at the boundary after `stage`.
pub fn scripted(stage: usize, candidates: usize, stages: usize) -> Decision {
    let selected = (stage * 2 + 1) % candidates;
    if stage + 1 == stages {
        Decision::finish(selected)
    } else {
        let mazes = (0..3).map(|i| MazeSpec::new(6, 6, (10 * stage + i) as u64)).collect();
        Decision::select(selected, mazes)
    }
}

/// Polls until the session awaits a decision or has finished.
pub async fn wait_pending(app: &Router, id: &str) -> Value {
    let deadline = Instant::now() + Duration::from_secs(120);
    loop {
        let (status, view) = call(app, "GET", &format!("/sessions/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        if view["phase"] != "training" {
            return view;
        }
        assert!(Instant::now() < deadline, "session {id} never left training");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

/// Plays the scripted decisions until the session finishes.
pub async fn play_out(app: &Router, id: &str) -> Value {
    loop {
        let view = wait_pending(app, id).await;
        if view["phase"] == "finished" {
            return view;
        }
        let stage = view["stage"].as_u64().unwrap() as usize;
        let candidates = view["pending"]["candidates"].as_u64().unwrap() as usize;
        let stages = view["stages"].as_u64().unwrap() as usize;
        let d = scripted(stage, candidates, stages);
        let (status, body) = call(app, "POST", &format!("/sessions/{id}/decision"), Some(serde_json::to_value(&d).unwrap())).await;
        assert_eq!(status, StatusCode::OK, "{body}");
    }
}
