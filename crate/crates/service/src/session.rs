//! One steered training session: state machine, event journal and on-disk
//! layout.
//!
//! ```text
//! <root>/<id>/session.json      checkpoint, candidate snapshots, journal length
//! <root>/<id>/events.jsonl      event journal
//! <root>/<id>/snapshots/        learner after each (stage, candidate) training
//! <root>/<id>/ledger.json       stage ledger, rewritten after every change
//! <root>/<id>/decisions.jsonl   hash-chained decision log
//! <root>/<id>/learner.amzq      final learner, once finished
//! ```
//!
//! `session.json` is the commit point. Journal lines past its recorded length
//! belong to an interrupted stage and are dropped on load; retraining the
//! stage emits them again identically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use amaze_core::env::{run_episode_traced, EpisodeResult, TraceStep};
use amaze_core::maze::MazeDocument;
use amaze_core::trainer::{
    Checkpoint, Clock, Decision, DecisionEntry, Edhucat, EdhucatConfig, EvalRecord, GreedyPolicy, Learner,
    LogicalClock, PendingDecision, Phase, StageRecord, SystemClock, TabularQ, TrainConfig, TrainingRun,
    DECISIONS_FILE, LEDGER_FILE, SNAPSHOT_FILE,
};
use amaze_core::{Maze, MazeSpec, RewardParams};
use serde::{Deserialize, Serialize};
use tokio::sync::watch;
use uuid::Uuid;

use crate::error::ServiceError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerChoice {
    TabularQ { alpha: f64, gamma: f64 },
}

impl Default for LearnerChoice {
    fn default() -> Self {
        LearnerChoice::TabularQ {
            alpha: amaze_core::trainer::tabular::DEFAULT_ALPHA,
            gamma: amaze_core::trainer::tabular::DEFAULT_GAMMA,
        }
    }
}

impl LearnerChoice {
    fn build(self) -> Result<TabularQ, ServiceError> {
        match self {
            LearnerChoice::TabularQ { alpha, gamma } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(ServiceError::invalid(format!("learner.alpha: {alpha} outside (0, 1]")));
                }
                if !(0.0..=1.0).contains(&gamma) {
                    return Err(ServiceError::invalid(format!("learner.gamma: {gamma} outside [0, 1]")));
                }
                Ok(TabularQ::new(alpha, gamma, 0))
            }
        }
    }
}

/// Timestamps for the decision log. `logical` makes logs reproducible.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockChoice {
    #[default]
    System,
    Logical,
}

impl ClockChoice {
    fn clock(self) -> &'static dyn Clock {
        match self {
            ClockChoice::System => &SystemClock,
            ClockChoice::Logical => &LogicalClock,
        }
    }
}

fn default_k() -> usize {
    3
}
fn default_stages() -> usize {
    10
}
fn default_budget() -> u64 {
    3_000_000
}

/// Body of `POST /sessions`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_stages")]
    pub stages: usize,
    #[serde(default = "default_budget")]
    pub budget: u64,
    pub initial: MazeSpec,
    #[serde(default)]
    pub target: Option<MazeSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub learner: LearnerChoice,
    #[serde(default)]
    pub clock: ClockChoice,
}

impl CreateSession {
    pub fn config(&self) -> EdhucatConfig {
        EdhucatConfig {
            k: self.k,
            stages: self.stages,
            budget: self.budget,
            initial: self.initial.clone(),
            target: self.target.clone(),
            seed: self.seed,
            train: self.train,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    SessionCreated { config: EdhucatConfig },
    StageStarted { mazes: Vec<String> },
    Evaluation { candidate: usize, record: EvalRecord },
    CandidateFinished { candidate: usize, consumed: u64, early_stop: bool, target: Option<EvalRecord> },
    DecisionPrompt { pending: PendingDecision },
    Decision { entry: DecisionEntry },
    Finished { selected: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub stage: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Serialize, Deserialize)]
struct Stored {
    id: Uuid,
    learner: LearnerChoice,
    clock: ClockChoice,
    checkpoint: Checkpoint,
    /// Hex-encoded learner snapshots of the current candidates.
    candidates: Vec<String>,
    journal_len: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CandidateView {
    pub index: usize,
    pub maze: String,
    pub steps: u64,
    pub allotted: u64,
    pub latest: Option<EvalRecord>,
    pub target: Option<EvalRecord>,
}

/// Full snapshot returned by `GET /sessions/{id}`.
#[derive(Clone, Debug, Serialize)]
pub struct SessionView {
    pub id: Uuid,
    pub phase: Phase,
    pub stage: usize,
    pub stages: usize,
    pub k: usize,
    pub stage_cap: u64,
    pub training: bool,
    pub pending: Option<PendingDecision>,
    pub candidates: Vec<CandidateView>,
    pub mazes: Vec<MazeDocument>,
    pub ledger: TrainingRun,
    pub decisions: Vec<DecisionEntry>,
    pub events: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryView {
    pub stage: usize,
    pub candidate: usize,
    pub maze: MazeDocument,
    pub result: EpisodeResult,
    pub trace: Vec<TraceStep>,
}

struct Inner {
    state: Edhucat<TabularQ>,
    events: Vec<Event>,
    training: bool,
}

pub struct Session {
    id: Uuid,
    dir: PathBuf,
    learner: LearnerChoice,
    clock: ClockChoice,
    inner: Mutex<Inner>,
    progress: Arc<Vec<AtomicU64>>,
    notify: watch::Sender<u64>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

impl Session {
    pub fn id(&self) -> Uuid {
        self.id
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn create(root: &Path, request: CreateSession) -> Result<Arc<Session>, ServiceError> {
        let prototype = request.learner.build()?;
        let config = request.config();
        let state = Edhucat::new(config.clone(), prototype)?;
        let id = Uuid::new_v4();
        let dir = root.join(id.to_string());
        fs::create_dir_all(dir.join("snapshots"))?;
        fs::File::create(dir.join("events.jsonl"))?;
        let session = Session::assemble(id, dir, request.learner, request.clock, state, Vec::new());
        {
            let mut inner = session.lock();
            session.emit(&mut inner, EventKind::SessionCreated { config })?;
            let mazes = inner.state.specs().iter().map(MazeSpec::descriptor).collect();
            session.emit(&mut inner, EventKind::StageStarted { mazes })?;
            session.persist(&inner)?;
        }
        Ok(session)
    }

    fn assemble(
        id: Uuid,
        dir: PathBuf,
        learner: LearnerChoice,
        clock: ClockChoice,
        state: Edhucat<TabularQ>,
        events: Vec<Event>,
    ) -> Arc<Session> {
        let k = state.config().k;
        let (notify, _) = watch::channel(events.len() as u64);
        Arc::new(Session {
            id,
            dir,
            learner,
            clock,
            inner: Mutex::new(Inner {
                state,
                events,
                training: false,
            }),
            progress: Arc::new((0..k).map(|_| AtomicU64::new(0)).collect()),
            notify,
        })
    }

    /// Reloads a session directory, discarding uncommitted journal lines.
    pub fn load(dir: &Path) -> Result<Arc<Session>, ServiceError> {
        let stored: Stored = serde_json::from_str(&fs::read_to_string(dir.join("session.json"))?)?;
        let snapshots = stored
            .candidates
            .iter()
            .map(|h| hex::decode(h).map_err(|e| ServiceError::invalid(format!("candidates: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let prototype = stored.learner.build()?;
        let state = Edhucat::resume(stored.checkpoint, &snapshots, &prototype)?;
        let journal = fs::read_to_string(dir.join("events.jsonl")).unwrap_or_default();
        let events: Vec<Event> = journal
            .lines()
            .take(stored.journal_len as usize)
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        if (events.len() as u64) < stored.journal_len {
            return Err(ServiceError::invalid("events: journal shorter than its committed length"));
        }
        let text: String = events
            .iter()
            .map(|e| serde_json::to_string(e).expect("events serialize") + "\n")
            .collect();
        write_atomic(&dir.join("events.jsonl"), text.as_bytes())?;
        Ok(Session::assemble(stored.id, dir.to_path_buf(), stored.learner, stored.clock, state, events))
    }

    fn emit(&self, inner: &mut Inner, kind: EventKind) -> Result<(), ServiceError> {
        let event = Event {
            seq: inner.events.len() as u64,
            stage: inner.state.stage(),
            kind,
        };
        let mut f = fs::OpenOptions::new().append(true).open(self.dir.join("events.jsonl"))?;
        f.write_all((serde_json::to_string(&event)? + "\n").as_bytes())?;
        inner.events.push(event);
        Ok(())
    }

    /// Commits the current state. Derived artifacts are refreshed after the
    /// commit point.
    fn persist(&self, inner: &Inner) -> Result<(), ServiceError> {
        let (checkpoint, snapshots) = inner.state.checkpoint();
        let stored = Stored {
            id: self.id,
            learner: self.learner,
            clock: self.clock,
            checkpoint,
            candidates: snapshots.iter().map(hex::encode).collect(),
            journal_len: inner.events.len() as u64,
        };
        write_atomic(&self.dir.join("session.json"), serde_json::to_string(&stored)?.as_bytes())?;
        let run = inner.state.run();
        write_atomic(&self.dir.join(LEDGER_FILE), run.ledger_json().as_bytes())?;
        write_atomic(&self.dir.join(DECISIONS_FILE), run.decisions.to_jsonl().as_bytes())?;
        if inner.state.is_finished() {
            write_atomic(&self.dir.join(SNAPSHOT_FILE), &run.final_snapshot)?;
        }
        self.notify.send_replace(inner.events.len() as u64);
        Ok(())
    }

    /// Whether the current stage still needs training and nobody is on it.
    pub fn needs_training(&self) -> bool {
        let inner = self.lock();
        inner.state.phase() == Phase::Training && !inner.training
    }

    /// Trains the current stage to completion on the calling thread. The
    /// lock is only held to take a copy and to commit the result.
    pub fn train_stage(&self) -> Result<(), ServiceError> {
        let mut work = {
            let mut inner = self.lock();
            if inner.state.phase() != Phase::Training || inner.training {
                return Ok(());
            }
            inner.training = true;
            inner.state.clone()
        };
        for p in self.progress.iter() {
            p.store(0, Ordering::Relaxed);
        }
        let result = work.train_current(Some(&self.progress)).map(|r| r.to_vec());
        let mut inner = self.lock();
        inner.training = false;
        let records = result?;
        let stage = work.stage();
        for (k, candidate) in work.candidates().iter().enumerate() {
            write_atomic(&self.dir.join("snapshots").join(format!("s{stage}_c{k}.amzq")), &candidate.snapshot())?;
        }
        inner.state = work;
        for r in &records {
            for record in &r.evaluations {
                self.emit(&mut inner, EventKind::Evaluation {
                    candidate: r.candidate,
                    record: record.clone(),
                })?;
            }
            self.emit(&mut inner, EventKind::CandidateFinished {
                candidate: r.candidate,
                consumed: r.consumed,
                early_stop: r.early_stop,
                target: r.target_evaluation.clone(),
            })?;
        }
        let pending = inner.state.pending().expect("a trained stage awaits a decision");
        self.emit(&mut inner, EventKind::DecisionPrompt { pending })?;
        self.persist(&inner)
    }

    pub fn decide(&self, decision: Decision) -> Result<DecisionEntry, ServiceError> {
        let mut inner = self.lock();
        if inner.state.pending().is_none() {
            return Err(ServiceError::Conflict(match inner.state.phase() {
                Phase::Finished => "the session has finished".into(),
                _ => "no decision is pending; the current stage is still training".into(),
            }));
        }
        let entry = inner.state.decide(decision, self.clock.clock())?.clone();
        self.emit(&mut inner, EventKind::Decision { entry: entry.clone() })?;
        if inner.state.is_finished() {
            let selected = entry.selected;
            self.emit(&mut inner, EventKind::Finished { selected })?;
        } else {
            let mazes = inner.state.specs().iter().map(MazeSpec::descriptor).collect();
            self.emit(&mut inner, EventKind::StageStarted { mazes })?;
        }
        self.persist(&inner)?;
        Ok(entry)
    }

    pub fn view(&self) -> SessionView {
        let inner = self.lock();
        let state = &inner.state;
        let records = if state.phase() == Phase::Training {
            &[][..]
        } else {
            state.current_records()
        };
        let cap = state.config().stage_cap();
        let candidates = state
            .specs()
            .iter()
            .enumerate()
            .map(|(k, spec)| {
                let record: Option<&StageRecord> = records.iter().find(|r| r.candidate == k);
                CandidateView {
                    index: k,
                    maze: spec.descriptor(),
                    steps: record.map_or_else(|| self.progress[k].load(Ordering::Relaxed), |r| r.consumed),
                    allotted: cap,
                    latest: record.map(|r| r.last_evaluation().clone()),
                    target: record.and_then(|r| r.target_evaluation.clone()),
                }
            })
            .collect();
        let mazes = state
            .specs()
            .iter()
            .filter_map(|s| Maze::generate(s).ok())
            .map(|m| m.to_document())
            .collect();
        SessionView {
            id: self.id,
            phase: state.phase(),
            stage: state.stage(),
            stages: state.config().stages,
            k: state.config().k,
            stage_cap: cap,
            training: inner.training,
            pending: state.pending(),
            candidates,
            mazes,
            ledger: state.run().clone(),
            decisions: state.decisions().entries().to_vec(),
            events: inner.events.len() as u64,
        }
    }

    pub fn events_from(&self, cursor: u64) -> Vec<Event> {
        let inner = self.lock();
        inner.events.iter().skip(cursor as usize).cloned().collect()
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.notify.subscribe()
    }

    pub fn is_finished(&self) -> bool {
        self.lock().state.is_finished()
    }

    /// Greedy replay of a trained candidate on its own stage maze.
    pub fn trajectory(&self, stage: usize, candidate: usize, rotation: u8) -> Result<TrajectoryView, ServiceError> {
        let spec = {
            let inner = self.lock();
            inner
                .state
                .run()
                .stages
                .iter()
                .find(|r| r.stage == stage && r.candidate == candidate)
                .map(|r| r.train.clone())
        }
        .ok_or_else(|| ServiceError::NotFound(format!("{}/trajectory/{stage}/{candidate}", self.id)))?;
        let bytes = fs::read(self.dir.join("snapshots").join(format!("s{stage}_c{candidate}.amzq")))?;
        let mut learner = self.learner.build()?;
        learner.restore(&bytes).map_err(amaze_core::error::TrainError::from)?;
        let maze = Maze::generate(&spec).map_err(amaze_core::error::TrainError::from)?.rotate(rotation % 4);
        let params = RewardParams::normalized(maze.path_len());
        let (result, trace) = run_episode_traced(
            &mut GreedyPolicy(&learner),
            &maze,
            &params,
            amaze_core::env::default_max_steps(&maze),
        );
        Ok(TrajectoryView {
            stage,
            candidate,
            maze: maze.to_document(),
            result,
            trace,
        })
    }
}
