mod common;

use std::fs;

use amaze_core::trainer::{
    edhucat_run, EdhucatConfig, LogicalClock, ScriptedDecisions, TabularQ, DECISIONS_FILE, LEDGER_FILE,
    SNAPSHOT_FILE,
};
use amaze_core::MazeSpec;
use amaze_service::{parse_create, AppState, Session};
use axum::http::StatusCode;
use common::*;
use serde_json::{json, Value};

fn reference_script() -> ScriptedDecisions {
    ScriptedDecisions::new((0..10).map(|s| scripted(s, if s == 0 { 1 } else { 3 }, 10)).collect())
}

fn reference_config() -> EdhucatConfig {
    parse_create(small_request()).unwrap().config()
}

#[tokio::test(flavor = "multi_thread")]
async fn create_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (status, view) = call(&app, "POST", "/sessions", Some(json!({"initial": "M0_5x5_C1"}))).await;
    assert_eq!(status, StatusCode::CREATED, "{view}");
    assert_eq!(view["stage_cap"], 100_000);
    assert_eq!(view["k"], 3);
    assert_eq!(view["stages"], 10);
    assert_eq!(view["stage"], 0);
    assert_eq!(view["phase"], "training");
    assert_eq!(view["candidates"].as_array().unwrap().len(), 1);
    assert_eq!(view["mazes"].as_array().unwrap().len(), 1);
    assert_eq!(view["decisions"], json!([]));
    assert_eq!(view["ledger"]["stages"], json!([]));
    let id = view["id"].as_str().unwrap().to_string();
    let (status, ids) = call(&app, "GET", "/sessions", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ids, json!([id]));
}

#[tokio::test(flavor = "multi_thread")]
async fn invalid_creations_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let cases = [
        (json!({"initial": "M0_5x5_C1", "stages": 1}), "stages"),
        (json!({"initial": "M0_5x5_C1", "k": 0}), "k"),
        (json!({"initial": "M0_5x5_C1", "budget": 5}), "budget"),
        (json!({"initial": "M0_1x5_C1"}), "initial"),
        (json!({"initial": "M0_5x5_C1", "colour": 1}), "colour"),
        (json!({"initial": "M0_5x5_C1", "learner": {"kind": "tabular_q", "alpha": 0.0, "gamma": 0.5}}), "learner.alpha"),
        (json!({"stages": 3}), "initial"),
    ];
    for (body, field) in cases {
        let (status, err) = call(&app, "POST", "/sessions", Some(body.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
        assert_eq!(err["field"], field, "{body}: {err}");
    }
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none(), "rejected sessions left files behind");
}

#[tokio::test(flavor = "multi_thread")]
async fn decision_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (_, view) = call(&app, "POST", "/sessions", Some(small_request())).await;
    let id = view["id"].as_str().unwrap().to_string();
    let url = format!("/sessions/{id}/decision");

    let view = wait_pending(&app, &id).await;
    assert_eq!(view["phase"], "awaiting_decision");
    assert_eq!(view["pending"]["kind"], "select+generate");
    assert_eq!(view["pending"]["mazes_required"], 3);
    assert_eq!(view["candidates"][0]["steps"], 1000);
    assert!(view["candidates"][0]["latest"].is_object());
    assert_eq!(view["ledger"]["stages"].as_array().unwrap().len(), 1);

    let three: Vec<String> = (0..3).map(|i| MazeSpec::new(6, 6, i).descriptor()).collect();
    let rejected = [
        (json!({"selected": 1, "mazes": three}), "selected"),
        (json!({"selected": 0, "mazes": three[..2]}), "mazes"),
        (json!({"selected": 0, "mazes": ["M0_6x6_C1", "M0_1x6_C1", "M0_6x6_C1"]}), "mazes[1]"),
        (json!({"mazes": three}), "selected"),
        (json!({"selected": 0, "mazes": three, "strategy": "reckless"}), "strategy"),
    ];
    for (body, field) in rejected {
        let (status, err) = call(&app, "POST", &url, Some(body.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
        assert_eq!(err["field"], field, "{body}: {err}");
        let (_, after) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
        assert_eq!(after, view, "a rejected decision changed the session");
    }

    let (status, entry) = call(&app, "POST", &url, Some(json!({"selected": 0, "mazes": three, "strategy": "careful"}))).await;
    assert_eq!(status, StatusCode::OK, "{entry}");
    assert_eq!(entry["index"], 0);
    assert_eq!(entry["kind"], "select+generate");
    assert_eq!(entry["timestamp"], 1);

    let view = wait_pending(&app, &id).await;
    assert_eq!(view["stage"], 1);
    assert_eq!(view["candidates"].as_array().unwrap().len(), 3);

    let (status, _) = call(&app, "POST", "/sessions/00000000-0000-0000-0000-000000000000/decision", Some(json!({"selected": 0}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "GET", "/sessions/nonsense", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn scripted_run_matches_in_process_driver() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (_, view) = call(&app, "POST", "/sessions", Some(small_request())).await;
    let id = view["id"].as_str().unwrap().to_string();
    let done = play_out(&app, &id).await;
    assert_eq!(done["phase"], "finished");
    assert_eq!(done["decisions"].as_array().unwrap().len(), 10);

    let reference = edhucat_run(TabularQ::default(), reference_config(), &mut reference_script(), &LogicalClock).unwrap();
    let session_dir = dir.path().join(&id);
    assert_eq!(fs::read_to_string(session_dir.join(LEDGER_FILE)).unwrap(), reference.ledger_json());
    assert_eq!(fs::read_to_string(session_dir.join(DECISIONS_FILE)).unwrap(), reference.decisions.to_jsonl());
    assert_eq!(fs::read(session_dir.join(SNAPSHOT_FILE)).unwrap(), reference.final_snapshot);
    assert!(reference.decisions.verify());
    let (status, err) = call(&app, "POST", &format!("/sessions/{id}/decision"), Some(json!({"selected": 0}))).await;
    assert_eq!(status, StatusCode::CONFLICT, "{err}");

    let (status, events) = call(&app, "GET", &format!("/sessions/{id}/events"), None).await;
    assert_eq!(status, StatusCode::OK);
    let events = events.as_array().unwrap().clone();
    let kinds: Vec<&str> = events.iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds[0], "session_created");
    assert_eq!(kinds[1], "stage_started");
    assert_eq!(*kinds.last().unwrap(), "finished");
    assert_eq!(kinds.iter().filter(|k| **k == "decision_prompt").count(), 10);
    assert_eq!(kinds.iter().filter(|k| **k == "candidate_finished").count(), 28);
    for (i, e) in events.iter().enumerate() {
        assert_eq!(e["seq"], i as u64);
    }
    let journal = fs::read_to_string(session_dir.join("events.jsonl")).unwrap();
    let parsed: Vec<Value> = journal.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(parsed, events);
    golden("scripted_events.jsonl", journal.as_bytes());

    // Cursor replay returns the tail.
    let (_, tail) = call(&app, "GET", &format!("/sessions/{id}/events?cursor=17"), None).await;
    assert_eq!(tail.as_array().unwrap()[..], events[17..]);
    let (_, empty) = call(&app, "GET", &format!("/sessions/{id}/events?cursor=100000"), None).await;
    assert_eq!(empty, json!([]));

    // A finished session streams its whole journal and closes.
    let (status, sse) = call_raw(&app, "GET", &format!("/sessions/{id}/events?cursor=0"), None, Some("text/event-stream")).await;
    assert_eq!(status, StatusCode::OK);
    let sse = String::from_utf8(sse).unwrap();
    assert_eq!(sse.matches("event: decision_prompt").count(), 10);
    assert!(sse.contains("event: finished"));
    assert!(sse.starts_with("id: 0\nevent: session_created\n") || sse.contains("event: session_created\nid: 0"));
}

#[tokio::test(flavor = "multi_thread")]
async fn trajectory_and_maze_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (_, view) = call(&app, "POST", "/sessions", Some(small_request())).await;
    let id = view["id"].as_str().unwrap().to_string();
    wait_pending(&app, &id).await;

    let (status, t) = call(&app, "GET", &format!("/sessions/{id}/trajectory/0/0"), None).await;
    assert_eq!(status, StatusCode::OK, "{t}");
    let trace = t["trace"].as_array().unwrap();
    assert!(!trace.is_empty());
    assert_eq!(t["result"]["steps"].as_u64().unwrap() as usize, trace.len());
    let (status, r) = call(&app, "GET", &format!("/sessions/{id}/trajectory/0/0?rotation=2"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(r["maze"]["rotation"], 2);
    let (status, _) = call(&app, "GET", &format!("/sessions/{id}/trajectory/4/0"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, maze) = call(&app, "GET", "/mazes/M3_8x6_C1", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(maze["width"], 8);
    let (status, metrics) = call(&app, "GET", "/mazes/M3_8x6_U_C1/metrics", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(metrics["deceptiveness"], 0.0);
    let (status, svg) = call_raw(&app, "GET", "/mazes/M3_8x6_C1/svg", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(String::from_utf8(svg).unwrap().starts_with("<svg"));
    let (status, err) = call(&app, "GET", "/mazes/M3_1x6_C1", None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(err["field"].is_string());
}

#[tokio::test(flavor = "multi_thread")]
async fn sessions_are_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (_, a) = call(&app, "POST", "/sessions", Some(small_request())).await;
    let mut other = small_request();
    other["seed"] = json!(8);
    let (_, b) = call(&app, "POST", "/sessions", Some(other)).await;
    let (a, b) = (a["id"].as_str().unwrap().to_string(), b["id"].as_str().unwrap().to_string());
    assert_ne!(a, b);
    wait_pending(&app, &a).await;
    let b_before = wait_pending(&app, &b).await;
    let three: Vec<String> = (0..3).map(|i| MazeSpec::new(6, 6, i).descriptor()).collect();
    let (status, _) = call(&app, "POST", &format!("/sessions/{a}/decision"), Some(json!({"selected": 0, "mazes": three}))).await;
    assert_eq!(status, StatusCode::OK);
    let (_, b_after) = call(&app, "GET", &format!("/sessions/{b}"), None).await;
    assert_eq!(b_after, b_before);
    let (_, ev_b) = call(&app, "GET", &format!("/sessions/{b}/events"), None).await;
    assert!(ev_b.as_array().unwrap().iter().all(|e| e["kind"] != "decision"));
}

#[tokio::test(flavor = "multi_thread")]
async fn restart_resumes_at_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let id;
    let before: Value;
    {
        let app = app(dir.path());
        let (_, view) = call(&app, "POST", "/sessions", Some(small_request())).await;
        id = view["id"].as_str().unwrap().to_string();
        for _ in 0..3 {
            let v = wait_pending(&app, &id).await;
            let d = scripted(v["stage"].as_u64().unwrap() as usize, v["pending"]["candidates"].as_u64().unwrap() as usize, 10);
            call(&app, "POST", &format!("/sessions/{id}/decision"), Some(serde_json::to_value(&d).unwrap())).await;
        }
        before = wait_pending(&app, &id).await;
    }
    let app = app(dir.path());
    let (status, after) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(after, before);
    play_out(&app, &id).await;
    let reference = edhucat_run(TabularQ::default(), reference_config(), &mut reference_script(), &LogicalClock).unwrap();
    assert_eq!(fs::read_to_string(dir.path().join(&id).join(LEDGER_FILE)).unwrap(), reference.ledger_json());
}

/// A crash after a decision but before the next stage commits leaves a
/// training-phase checkpoint and possibly a partial journal.
#[test]
fn interrupted_stage_is_retrained_identically() {
    let dir = tempfile::tempdir().unwrap();
    let request = parse_create(small_request()).unwrap();
    let session = Session::create(dir.path(), request).unwrap();
    let id = session.id().to_string();
    let sdir = dir.path().join(&id);
    let early = session.decide(scripted(0, 1, 10));
    assert!(matches!(early, Err(amaze_service::ServiceError::Conflict(_))), "{early:?}");
    session.train_stage().unwrap();
    session.decide(scripted(0, 1, 10)).unwrap();
    let committed = fs::read_to_string(sdir.join("events.jsonl")).unwrap();
    drop(session);

    let mut torn = committed.clone();
    torn.push_str("{\"seq\":999,\"stage\":1,\"kind\":\"evaluation\"");
    fs::write(sdir.join("events.jsonl"), torn).unwrap();

    let state = AppState::open(dir.path()).unwrap();
    let session = state.session(&id).unwrap();
    assert_eq!(fs::read_to_string(sdir.join("events.jsonl")).unwrap(), committed);
    assert!(session.needs_training());
    let mut script = reference_script().skip(1);
    while !session.is_finished() {
        session.train_stage().unwrap();
        let view = session.view();
        let pending = view.pending.unwrap();
        let d = amaze_core::trainer::DecisionSource::decide(&mut script, &pending, &[]).unwrap();
        session.decide(d).unwrap();
    }
    let reference = edhucat_run(TabularQ::default(), reference_config(), &mut reference_script(), &LogicalClock).unwrap();
    assert_eq!(fs::read_to_string(sdir.join(LEDGER_FILE)).unwrap(), reference.ledger_json());
    assert_eq!(fs::read_to_string(sdir.join(DECISIONS_FILE)).unwrap(), reference.decisions.to_jsonl());
    assert_eq!(fs::read(sdir.join(SNAPSHOT_FILE)).unwrap(), reference.final_snapshot);
    let journal = fs::read_to_string(sdir.join("events.jsonl")).unwrap();
    golden("scripted_events.jsonl", journal.as_bytes());
}
