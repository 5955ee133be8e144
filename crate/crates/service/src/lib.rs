//! HTTP service for human-steered staged training.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/sessions` | create a session and start stage 0 |
//! | GET | `/sessions` | list session ids |
//! | GET | `/sessions/{id}` | full state snapshot |
//! | POST | `/sessions/{id}/decision` | answer the pending decision |
//! | GET | `/sessions/{id}/events?cursor=N` | events from `N`; SSE when `Accept: text/event-stream` |
//! | GET | `/sessions/{id}/trajectory/{stage}/{candidate}?rotation=R` | greedy replay |
//! | GET | `/mazes/{descriptor}` | maze document |
//! | GET | `/mazes/{descriptor}/svg` | rendered maze |
//! | GET | `/mazes/{descriptor}/metrics` | complexity report |

pub mod error;
pub mod session;

use std::collections::HashMap;
use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use amaze_core::complexity::{report, ComplexityReport};
use amaze_core::maze::MazeDocument;
use amaze_core::render::maze_svg;
use amaze_core::trainer::{Decision, DecisionEntry, Strategy, TrainConfig};
use amaze_core::{Maze, MazeSpec};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;
use uuid::Uuid;

pub use error::ServiceError;
pub use session::{ClockChoice, CreateSession, Event, EventKind, LearnerChoice, Session, SessionView, TrajectoryView};

/// Shared state behind the router.
#[derive(Clone)]
pub struct AppState {
    root: PathBuf,
    sessions: Arc<RwLock<HashMap<Uuid, Arc<Session>>>>,
}

impl AppState {
    /// Opens `root`, reloading every session found there. Sessions whose
    /// current stage was interrupted are retrained in the background.
    pub fn open(root: &Path) -> Result<AppState, ServiceError> {
        std::fs::create_dir_all(root)?;
        let mut sessions = HashMap::new();
        for entry in std::fs::read_dir(root)? {
            let dir = entry?.path();
            if !dir.join("session.json").is_file() {
                continue;
            }
            match Session::load(&dir) {
                Ok(s) => {
                    sessions.insert(s.id(), s);
                }
                Err(e) => tracing::warn!("skipping {}: {e}", dir.display()),
            }
        }
        Ok(AppState {
            root: root.to_path_buf(),
            sessions: Arc::new(RwLock::new(sessions)),
        })
    }

    pub fn session(&self, id: &str) -> Result<Arc<Session>, ServiceError> {
        let uuid = Uuid::parse_str(id).map_err(|_| ServiceError::NotFound(id.to_string()))?;
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(&uuid)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    /// Starts background training for every loaded session that needs it.
    /// Requires a running tokio runtime.
    pub fn resume_all(&self) {
        let sessions: Vec<_> = self.sessions.read().unwrap_or_else(|e| e.into_inner()).values().cloned().collect();
        for s in sessions {
            spawn_training(s);
        }
    }
}

fn spawn_training(session: Arc<Session>) {
    if !session.needs_training() {
        return;
    }
    tokio::task::spawn_blocking(move || {
        if let Err(e) = session.train_stage() {
            tracing::error!("session {}: training failed: {e}", session.id());
        }
    });
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/decision", post(post_decision))
        .route("/sessions/{id}/events", get(get_events))
        .route("/sessions/{id}/trajectory/{stage}/{candidate}", get(get_trajectory))
        .route("/mazes/{descriptor}", get(get_maze))
        .route("/mazes/{descriptor}/svg", get(get_maze_svg))
        .route("/mazes/{descriptor}/metrics", get(get_maze_metrics))
        .with_state(state)
}

/// Serves on `addr` until the process is stopped.
pub async fn serve(addr: SocketAddr, root: &Path) -> Result<(), ServiceError> {
    let state = AppState::open(root)?;
    state.resume_all();
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

fn field<T: DeserializeOwned>(name: &str, value: Value) -> Result<T, ServiceError> {
    serde_json::from_value(value).map_err(|e| ServiceError::Invalid {
        field: Some(name.to_string()),
        message: format!("{name}: {e}"),
    })
}

fn spec_field(name: &str, value: Value) -> Result<MazeSpec, ServiceError> {
    let text: String = field(name, value)?;
    MazeSpec::from_descriptor(&text).map_err(|e| ServiceError::Invalid {
        field: Some(name.to_string()),
        message: format!("{name}: {e}"),
    })
}

fn object(body: Value) -> Result<serde_json::Map<String, Value>, ServiceError> {
    match body {
        Value::Object(map) => Ok(map),
        _ => Err(ServiceError::invalid("body: expected a JSON object")),
    }
}

/// Field-by-field parse so every rejection names the offending field.
pub fn parse_create(body: Value) -> Result<CreateSession, ServiceError> {
    let mut initial = None;
    let mut request = CreateSession {
        k: 3,
        stages: 10,
        budget: 3_000_000,
        initial: MazeSpec::default(),
        target: None,
        seed: 0,
        train: TrainConfig::default(),
        learner: LearnerChoice::default(),
        clock: ClockChoice::default(),
    };
    for (key, value) in object(body)? {
        match key.as_str() {
            "k" => request.k = field(&key, value)?,
            "stages" => request.stages = field(&key, value)?,
            "budget" => request.budget = field(&key, value)?,
            "seed" => request.seed = field(&key, value)?,
            "initial" => initial = Some(spec_field(&key, value)?),
            "target" if value.is_null() => request.target = None,
            "target" => request.target = Some(spec_field(&key, value)?),
            "train" => request.train = field(&key, value)?,
            "learner" => request.learner = field(&key, value)?,
            "clock" => request.clock = field(&key, value)?,
            _ => {
                return Err(ServiceError::Invalid {
                    message: format!("{key}: unknown field"),
                    field: Some(key),
                })
            }
        }
    }
    request.initial = initial.ok_or_else(|| ServiceError::invalid("initial: a maze descriptor is required"))?;
    Ok(request)
}

pub fn parse_decision(body: Value) -> Result<Decision, ServiceError> {
    let mut selected = None;
    let mut decision = Decision::finish(0);
    for (key, value) in object(body)? {
        match key.as_str() {
            "selected" => selected = Some(field::<usize>(&key, value)?),
            "mazes" => {
                let items: Vec<Value> = field(&key, value)?;
                decision.mazes = items
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| spec_field(&format!("mazes[{i}]"), v))
                    .collect::<Result<_, _>>()?;
            }
            "strategy" => decision.strategy = field::<Option<Strategy>>(&key, value)?,
            "abort" => decision.abort = field(&key, value)?,
            _ => {
                return Err(ServiceError::Invalid {
                    message: format!("{key}: unknown field"),
                    field: Some(key),
                })
            }
        }
    }
    decision.selected = selected.ok_or_else(|| ServiceError::invalid("selected: a candidate index is required"))?;
    Ok(decision)
}

async fn create_session(
    State(state): State<AppState>,
    Json(body): Json<Value>,
) -> Result<(StatusCode, Json<SessionView>), ServiceError> {
    let request = parse_create(body)?;
    let root = state.root.clone();
    let session = tokio::task::spawn_blocking(move || Session::create(&root, request))
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e)))??;
    state
        .sessions
        .write()
        .unwrap_or_else(|e| e.into_inner())
        .insert(session.id(), session.clone());
    let view = session.view();
    spawn_training(session);
    Ok((StatusCode::CREATED, Json(view)))
}

async fn list_sessions(State(state): State<AppState>) -> Json<Vec<Uuid>> {
    let mut ids: Vec<Uuid> = state.sessions.read().unwrap_or_else(|e| e.into_inner()).keys().copied().collect();
    ids.sort();
    Json(ids)
}

async fn get_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ServiceError> {
    Ok(Json(state.session(&id)?.view()))
}

async fn post_decision(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<Value>,
) -> Result<Json<DecisionEntry>, ServiceError> {
    let session = state.session(&id)?;
    let decision = parse_decision(body)?;
    let worker = session.clone();
    let entry = tokio::task::spawn_blocking(move || worker.decide(decision))
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e)))??;
    spawn_training(session);
    Ok(Json(entry))
}

#[derive(Deserialize)]
struct Cursor {
    #[serde(default)]
    cursor: u64,
}

async fn get_events(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<Cursor>,
    headers: HeaderMap,
) -> Result<Response, ServiceError> {
    let session = state.session(&id)?;
    let wants_stream = headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("text/event-stream"));
    if !wants_stream {
        return Ok(Json(session.events_from(q.cursor)).into_response());
    }
    let rx = session.subscribe();
    let stream = futures_util::stream::unfold(
        (session, rx, q.cursor, std::collections::VecDeque::new()),
        |(session, mut rx, mut cursor, mut queue)| async move {
            loop {
                if let Some(event) = queue.pop_front() {
                    return Some((Ok::<_, Infallible>(sse_event(&event)), (session, rx, cursor, queue)));
                }
                let fresh = session.events_from(cursor);
                if !fresh.is_empty() {
                    cursor += fresh.len() as u64;
                    queue.extend(fresh);
                    continue;
                }
                if session.is_finished() || rx.changed().await.is_err() {
                    return None;
                }
            }
        },
    );
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()).into_response())
}

fn sse_event(event: &Event) -> SseEvent {
    let name = match &event.kind {
        EventKind::SessionCreated { .. } => "session_created",
        EventKind::StageStarted { .. } => "stage_started",
        EventKind::Evaluation { .. } => "evaluation",
        EventKind::CandidateFinished { .. } => "candidate_finished",
        EventKind::DecisionPrompt { .. } => "decision_prompt",
        EventKind::Decision { .. } => "decision",
        EventKind::Finished { .. } => "finished",
    };
    SseEvent::default()
        .id(event.seq.to_string())
        .event(name)
        .data(serde_json::to_string(event).expect("events serialize"))
}

#[derive(Deserialize)]
struct Rotation {
    #[serde(default)]
    rotation: u8,
}

async fn get_trajectory(
    State(state): State<AppState>,
    UrlPath((id, stage, candidate)): UrlPath<(String, usize, usize)>,
    Query(q): Query<Rotation>,
) -> Result<Json<TrajectoryView>, ServiceError> {
    let session = state.session(&id)?;
    let view = tokio::task::spawn_blocking(move || session.trajectory(stage, candidate, q.rotation))
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e)))??;
    Ok(Json(view))
}

fn maze_from(descriptor: &str) -> Result<Maze, ServiceError> {
    let spec = MazeSpec::from_descriptor(descriptor).map_err(|e| ServiceError::Invalid {
        field: Some(e.field.clone()),
        message: e.to_string(),
    })?;
    Ok(Maze::generate(&spec).map_err(amaze_core::error::TrainError::from)?)
}

async fn get_maze(UrlPath(descriptor): UrlPath<String>) -> Result<Json<MazeDocument>, ServiceError> {
    Ok(Json(maze_from(&descriptor)?.to_document()))
}

async fn get_maze_svg(UrlPath(descriptor): UrlPath<String>) -> Result<Response, ServiceError> {
    let svg = maze_svg(&maze_from(&descriptor)?, None);
    Ok(([(header::CONTENT_TYPE, "image/svg+xml")], svg).into_response())
}

async fn get_maze_metrics(UrlPath(descriptor): UrlPath<String>) -> Result<Json<ComplexityReport>, ServiceError> {
    Ok(Json(report(&maze_from(&descriptor)?)))
}
