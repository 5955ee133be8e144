//! Staged training steered by an external decision maker.
//!
//! Stage 0 trains one learner on the initial maze. At every later boundary
//! the decision maker selects one of the current candidates and supplies
//! `k` maze specs; the selected learner is copied `k` times and copy `i`
//! trains on maze `i`. After the last stage a final selection picks the
//! result. Each candidate gets at most `budget / (k * stages)` steps.
//!
//! [`Edhucat`] is an explicit state machine so a host can persist it at
//! every boundary and resume after a crash; [`edhucat_run`] drives it to
//! completion against a [`DecisionSource`].

use std::fmt;
use std::sync::atomic::AtomicU64;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::TrainError;
use crate::maze::Maze;
use crate::spec::MazeSpec;

use super::{evaluate_greedy, stage_seed, train_stage, Learner, Regime, StageRecord, TrainConfig, TrainingRun};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdhucatConfig {
    /// Concurrent candidates per stage.
    pub k: usize,
    pub stages: usize,
    pub budget: u64,
    pub initial: MazeSpec,
    /// Maze the candidates are additionally evaluated on after every stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<MazeSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub train: TrainConfig,
}

impl EdhucatConfig {
    pub fn new(initial: MazeSpec, budget: u64) -> Self {
        EdhucatConfig {
            k: 3,
            stages: 10,
            budget,
            initial,
            target: None,
            seed: 0,
            train: TrainConfig::default(),
        }
    }

    /// Per-candidate step cap.
    pub fn stage_cap(&self) -> u64 {
        self.budget / (self.k as u64 * self.stages as u64)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.k < 1 {
            return Err(TrainError::Config("k: at least one candidate per stage is required".into()));
        }
        if self.stages < 2 {
            return Err(TrainError::Config(format!(
                "stages: at least 2 stages are required, got {}",
                self.stages
            )));
        }
        if self.stage_cap() == 0 {
            return Err(TrainError::Config(format!(
                "budget: {} is too small for {} stages of {} candidates",
                self.budget, self.stages, self.k
            )));
        }
        self.train.validate()?;
        self.initial
            .validate()
            .map_err(|e| TrainError::Config(format!("initial.{}: {e}", e.field())))?;
        if let Some(target) = &self.target {
            target
                .validate()
                .map_err(|e| TrainError::Config(format!("target.{}: {e}", e.field())))?;
        }
        Ok(())
    }
}

/// Self-reported steering style, stored for later analysis only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Careful,
    Moderate,
    Risky,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionKind {
    #[serde(rename = "select+generate")]
    SelectAndGenerate,
    #[serde(rename = "final-select")]
    FinalSelect,
    /// Ends the run early at a boundary, keeping the selected candidate.
    #[serde(rename = "abort")]
    Abort,
}

impl fmt::Display for DecisionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecisionKind::SelectAndGenerate => "select+generate",
            DecisionKind::FinalSelect => "final-select",
            DecisionKind::Abort => "abort",
        })
    }
}

/// An answer to a pending decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub selected: usize,
    /// Next stage's mazes; empty for final selections and aborts.
    #[serde(default)]
    pub mazes: Vec<MazeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub abort: bool,
}

impl Decision {
    pub fn select(selected: usize, mazes: Vec<MazeSpec>) -> Self {
        Decision {
            selected,
            mazes,
            strategy: None,
            abort: false,
        }
    }

    pub fn finish(selected: usize) -> Self {
        Decision::select(selected, Vec::new())
    }
}

/// What the decision maker has to answer at a boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendingDecision {
    pub kind: DecisionKind,
    /// Stage that just finished.
    pub stage: usize,
    pub candidates: usize,
    /// Number of maze specs the answer must carry.
    pub mazes_required: usize,
}

/// Source of timestamps for the decision log.
pub trait Clock: Send + Sync {
    /// Timestamp for the log entry at `index`.
    fn stamp(&self, index: usize) -> u64;
}

/// Entry index plus one; makes logs reproducible.
#[derive(Clone, Copy, Debug, Default)]
pub struct LogicalClock;

impl Clock for LogicalClock {
    fn stamp(&self, index: usize) -> u64 {
        index as u64 + 1
    }
}

/// Milliseconds since the Unix epoch.
#[derive(Clone, Copy, Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn stamp(&self, _index: usize) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionEntry {
    pub index: usize,
    pub stage: usize,
    pub kind: DecisionKind,
    pub selected: usize,
    pub mazes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    pub timestamp: u64,
    pub prev_hash: String,
    pub hash: String,
}

impl DecisionEntry {
    fn digest(&self) -> String {
        let body = serde_json::json!({
            "index": self.index,
            "stage": self.stage,
            "kind": self.kind,
            "selected": self.selected,
            "mazes": self.mazes,
            "strategy": self.strategy,
            "timestamp": self.timestamp,
            "prev_hash": self.prev_hash,
        });
        let mut hasher = Sha256::new();
        hasher.update(body.to_string().as_bytes());
        hex::encode(hasher.finalize())
    }
}

/// Append-only, hash-chained decision record.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionLog {
    entries: Vec<DecisionEntry>,
}

pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

impl DecisionLog {
    pub fn entries(&self) -> &[DecisionEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn head(&self) -> &str {
        self.entries.last().map_or(GENESIS_HASH, |e| e.hash.as_str())
    }

    fn append(
        &mut self,
        stage: usize,
        kind: DecisionKind,
        decision: &Decision,
        clock: &dyn Clock,
    ) -> &DecisionEntry {
        let index = self.entries.len();
        let mut entry = DecisionEntry {
            index,
            stage,
            kind,
            selected: decision.selected,
            mazes: decision.mazes.iter().map(MazeSpec::descriptor).collect(),
            strategy: decision.strategy,
            timestamp: clock.stamp(index),
            prev_hash: self.head().to_string(),
            hash: String::new(),
        };
        entry.hash = entry.digest();
        self.entries.push(entry);
        self.entries.last().expect("just pushed")
    }

    /// Checks indices, the hash chain and every entry's own hash.
    pub fn verify(&self) -> bool {
        let mut prev = GENESIS_HASH;
        for (i, e) in self.entries.iter().enumerate() {
            if e.index != i || e.prev_hash != prev || e.hash != e.digest() {
                return false;
            }
            prev = &e.hash;
        }
        true
    }

    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("entries serialize") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TrainError> {
        let entries = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<DecisionEntry>, _>>()?;
        let log = DecisionLog { entries };
        if !log.verify() {
            return Err(TrainError::Decision("decision log hash chain is broken".into()));
        }
        Ok(log)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// The current stage's candidates still have to train.
    Training,
    AwaitingDecision,
    Finished,
}

/// Resumable state of a steered run.
#[derive(Clone, Debug)]
pub struct Edhucat<L> {
    config: EdhucatConfig,
    stage: usize,
    phase: Phase,
    parent: Option<usize>,
    specs: Vec<MazeSpec>,
    candidates: Vec<L>,
    run: TrainingRun,
}

/// Serializable part of [`Edhucat`]; candidate snapshots travel separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: EdhucatConfig,
    pub stage: usize,
    pub phase: Phase,
    pub parent: Option<usize>,
    pub specs: Vec<MazeSpec>,
    pub run: TrainingRun,
    pub decisions: DecisionLog,
}

impl<L: Learner + Clone> Edhucat<L> {
    pub fn new(config: EdhucatConfig, prototype: L) -> Result<Self, TrainError> {
        config.validate()?;
        let run = TrainingRun {
            regime: Regime::Edhucat,
            budget: config.budget,
            seed: config.seed,
            stages: Vec::new(),
            selected: None,
            final_snapshot: Vec::new(),
            decisions: DecisionLog::default(),
        };
        Ok(Edhucat {
            specs: vec![config.initial.clone()],
            config,
            stage: 0,
            phase: Phase::Training,
            parent: None,
            candidates: vec![prototype],
            run,
        })
    }

    pub fn config(&self) -> &EdhucatConfig {
        &self.config
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn specs(&self) -> &[MazeSpec] {
        &self.specs
    }

    pub fn candidates(&self) -> &[L] {
        &self.candidates
    }

    pub fn run(&self) -> &TrainingRun {
        &self.run
    }

    pub fn decisions(&self) -> &DecisionLog {
        &self.run.decisions
    }

    /// Ledger rows of the current stage, once trained.
    pub fn current_records(&self) -> &[StageRecord] {
        let start = self.run.stages.partition_point(|r| r.stage < self.stage);
        &self.run.stages[start..]
    }

    pub fn pending(&self) -> Option<PendingDecision> {
        if self.phase != Phase::AwaitingDecision {
            return None;
        }
        let last = self.stage + 1 == self.config.stages;
        Some(PendingDecision {
            kind: if last {
                DecisionKind::FinalSelect
            } else {
                DecisionKind::SelectAndGenerate
            },
            stage: self.stage,
            candidates: self.candidates.len(),
            mazes_required: if last { 0 } else { self.config.k },
        })
    }

    /// Trains every candidate of the current stage, concurrently. `progress`
    /// receives per-candidate step counts at each evaluation point.
    pub fn train_current(&mut self, progress: Option<&[AtomicU64]>) -> Result<&[StageRecord], TrainError> {
        if self.phase != Phase::Training {
            return Err(TrainError::Decision("the current stage has already been trained".into()));
        }
        let mazes: Vec<Maze> = self
            .specs
            .iter()
            .map(Maze::generate)
            .collect::<Result<_, _>>()?;
        let target = self.config.target.as_ref().map(Maze::generate).transpose()?;
        let target_rot = target.as_ref().map(Maze::rotations);
        let cap = self.config.stage_cap();
        let (stage, seed, train_cfg) = (self.stage, self.config.seed, self.config.train);
        let outcomes: Vec<_> = self
            .candidates
            .par_iter_mut()
            .zip(&mazes)
            .enumerate()
            .map(|(k, (learner, maze))| {
                learner.reseed(stage_seed(seed, stage, k));
                let counter = progress.and_then(|p| p.get(k));
                let outcome = train_stage(learner, maze, maze, cap, &train_cfg, counter);
                let target_eval = target_rot
                    .as_ref()
                    .map(|rot| evaluate_greedy(learner, rot, outcome.consumed));
                (outcome, target_eval)
            })
            .collect();
        for (k, (outcome, target_evaluation)) in outcomes.into_iter().enumerate() {
            self.run.stages.push(StageRecord {
                stage,
                candidate: k,
                parent: self.parent,
                train: self.specs[k].clone(),
                eval: self.specs[k].clone(),
                allotted: cap,
                consumed: outcome.consumed,
                early_stop: outcome.early_stop,
                evaluations: outcome.evaluations,
                target_evaluation,
            });
        }
        self.phase = Phase::AwaitingDecision;
        Ok(self.current_records())
    }

    /// Validates and applies a decision; on rejection nothing changes.
    pub fn decide(&mut self, decision: Decision, clock: &dyn Clock) -> Result<&DecisionEntry, TrainError> {
        let pending = self.pending().ok_or(TrainError::NoPendingDecision)?;
        if decision.selected >= pending.candidates {
            return Err(TrainError::Decision(format!(
                "selected: candidate {} does not exist (stage {} has {})",
                decision.selected, pending.stage, pending.candidates
            )));
        }
        let kind = if decision.abort {
            if !decision.mazes.is_empty() {
                return Err(TrainError::Decision("mazes: an abort carries no mazes".into()));
            }
            DecisionKind::Abort
        } else {
            if decision.mazes.len() != pending.mazes_required {
                return Err(TrainError::Decision(format!(
                    "mazes: expected {} maze specs, got {}",
                    pending.mazes_required,
                    decision.mazes.len()
                )));
            }
            for (i, spec) in decision.mazes.iter().enumerate() {
                spec.validate()
                    .map_err(|e| TrainError::Decision(format!("mazes[{i}].{}: {e}", e.field())))?;
            }
            pending.kind
        };
        let selected = decision.selected;
        match kind {
            DecisionKind::SelectAndGenerate => {
                let chosen = self.candidates[selected].clone();
                self.candidates = vec![chosen; self.config.k];
                self.specs = decision.mazes.clone();
                self.parent = Some(selected);
                self.stage += 1;
                self.phase = Phase::Training;
            }
            DecisionKind::FinalSelect | DecisionKind::Abort => {
                self.run.selected = Some(selected);
                self.run.final_snapshot = self.candidates[selected].snapshot();
                self.phase = Phase::Finished;
            }
        }
        Ok(self.run.decisions.append(pending.stage, kind, &decision, clock))
    }

    pub fn is_finished(&self) -> bool {
        self.phase == Phase::Finished
    }

    pub fn into_run(self) -> TrainingRun {
        self.run
    }

    pub fn checkpoint(&self) -> (Checkpoint, Vec<Vec<u8>>) {
        let mut run = self.run.clone();
        let decisions = std::mem::take(&mut run.decisions);
        (
            Checkpoint {
                config: self.config.clone(),
                stage: self.stage,
                phase: self.phase,
                parent: self.parent,
                specs: self.specs.clone(),
                run,
                decisions,
            },
            self.candidates.iter().map(|c| c.snapshot()).collect(),
        )
    }

    /// Rebuilds a run from a checkpoint; each candidate starts as a clone of
    /// `prototype` and restores its snapshot.
    pub fn resume(checkpoint: Checkpoint, snapshots: &[Vec<u8>], prototype: &L) -> Result<Self, TrainError> {
        checkpoint.config.validate()?;
        if !checkpoint.decisions.verify() {
            return Err(TrainError::Decision("decision log hash chain is broken".into()));
        }
        let mut candidates = Vec::with_capacity(snapshots.len());
        for bytes in snapshots {
            let mut learner = prototype.clone();
            learner.restore(bytes)?;
            candidates.push(learner);
        }
        let mut run = checkpoint.run;
        run.decisions = checkpoint.decisions;
        if run.final_snapshot.is_empty() && checkpoint.phase == Phase::Finished {
            if let Some(sel) = run.selected {
                run.final_snapshot = snapshots.get(sel).cloned().unwrap_or_default();
            }
        }
        Ok(Edhucat {
            config: checkpoint.config,
            stage: checkpoint.stage,
            phase: checkpoint.phase,
            parent: checkpoint.parent,
            specs: checkpoint.specs,
            candidates,
            run,
        })
    }
}

/// Supplies answers at stage boundaries.
pub trait DecisionSource {
    fn decide(&mut self, pending: &PendingDecision, records: &[StageRecord]) -> Result<Decision, TrainError>;
}

/// Replays a fixed list of decisions in order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedDecisions {
    pub decisions: Vec<Decision>,
    #[serde(skip)]
    next: usize,
}

impl ScriptedDecisions {
    pub fn new(decisions: Vec<Decision>) -> Self {
        ScriptedDecisions { decisions, next: 0 }
    }

    /// One JSON decision per non-empty line.
    pub fn from_jsonl(text: &str) -> Result<Self, TrainError> {
        let decisions = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<Decision>, _>>()?;
        Ok(ScriptedDecisions::new(decisions))
    }

    pub fn to_jsonl(&self) -> String {
        self.decisions
            .iter()
            .map(|d| serde_json::to_string(d).expect("decisions serialize") + "\n")
            .collect()
    }

    /// Decisions that move a fixed candidate through `specs` (one stage per
    /// spec after the first), each stage training `k` copies on the same spec.
    pub fn replay_specs(specs: &[MazeSpec], k: usize, selected: usize) -> Self {
        let mut decisions: Vec<Decision> = specs
            .iter()
            .skip(1)
            .map(|s| Decision::select(selected, vec![s.clone(); k]))
            .collect();
        decisions.push(Decision::finish(selected));
        ScriptedDecisions::new(decisions)
    }

    /// Skips the first `n` decisions, used when resuming a partly played run.
    pub fn skip(mut self, n: usize) -> Self {
        self.next = n;
        self
    }
}

impl DecisionSource for ScriptedDecisions {
    fn decide(&mut self, pending: &PendingDecision, _records: &[StageRecord]) -> Result<Decision, TrainError> {
        let d = self.decisions.get(self.next).cloned().ok_or_else(|| {
            TrainError::SourceUnavailable(format!("script exhausted at stage {}", pending.stage))
        })?;
        self.next += 1;
        Ok(d)
    }
}

/// Always selects the same candidate and regenerates the same maze.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedDecisions {
    pub selected: usize,
    pub maze: MazeSpec,
}

impl DecisionSource for FixedDecisions {
    fn decide(&mut self, pending: &PendingDecision, _records: &[StageRecord]) -> Result<Decision, TrainError> {
        let selected = self.selected.min(pending.candidates - 1);
        Ok(Decision::select(selected, vec![self.maze.clone(); pending.mazes_required]))
    }
}

/// Runs the steered protocol to completion.
pub fn edhucat_run<L: Learner + Clone>(
    prototype: L,
    config: EdhucatConfig,
    source: &mut dyn DecisionSource,
    clock: &dyn Clock,
) -> Result<TrainingRun, TrainError> {
    let mut state = Edhucat::new(config, prototype)?;
    drive(&mut state, source, clock)?;
    Ok(state.into_run())
}

/// Advances a (possibly resumed) run until it finishes.
pub fn drive<L: Learner + Clone>(
    state: &mut Edhucat<L>,
    source: &mut dyn DecisionSource,
    clock: &dyn Clock,
) -> Result<(), TrainError> {
    while !state.is_finished() {
        if state.phase() == Phase::Training {
            state.train_current(None)?;
        }
        let pending = state.pending().expect("awaiting a decision after training");
        let decision = source.decide(&pending, state.current_records())?;
        state.decide(decision, clock)?;
    }
    Ok(())
}
