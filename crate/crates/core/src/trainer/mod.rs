//! Training regimes over a pluggable learner: direct, interpolation
//! scaffolding, and the staged human-steered protocol in [`edhucat`].
//!
//! Every stage trains on the four rotations of its maze in round-robin
//! episodes under raw rewards, evaluates the greedy policy on the four
//! rotations of its evaluation maze under normalized rewards, and stops early
//! once all four evaluation episodes are optimal.

pub mod edhucat;
pub mod tabular;

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::env::{default_max_steps, run_episode, Env, Policy, RewardParams};
use crate::error::{SnapshotError, TrainError};
use crate::geometry::Direction;
use crate::maze::Maze;
use crate::observe::Observation;
use crate::rng::derive_seed;
use crate::spec::{Glyph, MazeSpec};

pub use edhucat::{
    drive, edhucat_run, Checkpoint, Clock, Decision, DecisionEntry, DecisionKind, DecisionLog, DecisionSource,
    Edhucat, EdhucatConfig, FixedDecisions, LogicalClock, PendingDecision, Phase, ScriptedDecisions, Strategy,
    SystemClock,
};
pub use tabular::TabularQ;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    pub action: Direction,
    pub reward: f64,
    pub next: Observation,
    /// The goal was reached; truncated episodes still bootstrap.
    pub terminal: bool,
}

/// The seam between the training regimes and a concrete learning algorithm.
pub trait Learner: Send {
    /// Exploratory action; `epsilon` is the exploration probability.
    fn act(&mut self, observation: &Observation, epsilon: f64) -> Direction;
    /// Deterministic action used for evaluation.
    fn greedy(&self, observation: &Observation) -> Direction;
    fn learn(&mut self, transition: &Transition);
    /// Resets the learner's exploration stream.
    fn reseed(&mut self, seed: u64);
    fn snapshot(&self) -> Vec<u8>;
    fn restore(&mut self, bytes: &[u8]) -> Result<(), SnapshotError>;
}

/// Evaluation view of a learner.
pub struct GreedyPolicy<'a, L: ?Sized>(pub &'a L);

impl<L: ?Sized> Clone for GreedyPolicy<'_, L> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<L: ?Sized> Copy for GreedyPolicy<'_, L> {}

impl<L: Learner + ?Sized> Policy for GreedyPolicy<'_, L> {
    fn act(&mut self, observation: &Observation) -> Direction {
        self.0.greedy(observation)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub eval_interval: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Share of each stage's allotment over which epsilon decays.
    pub decay_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eval_interval: 10_000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            decay_fraction: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn epsilon(&self, step: u64, allotted: u64) -> f64 {
        let horizon = self.decay_fraction * allotted as f64;
        if horizon <= 0.0 {
            return self.epsilon_end;
        }
        let t = step as f64 / horizon;
        if t >= 1.0 {
            return self.epsilon_end;
        }
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }

    fn validate(&self) -> Result<(), TrainError> {
        if self.eval_interval == 0 {
            return Err(TrainError::Config("eval_interval must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return Err(TrainError::Config("epsilon bounds must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.decay_fraction) {
            return Err(TrainError::Config("decay_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Greedy evaluation over the four rotations of a maze.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    /// Stage-local step count when the evaluation ran.
    pub step: u64,
    pub success_rate: f64,
    pub mean_normalized_return: f64,
    /// All four rotations were solved optimally.
    pub optimal: bool,
}

pub fn evaluate_greedy<L: Learner + ?Sized>(learner: &L, rotations: &[Maze], step: u64) -> EvalRecord {
    let mut successes = 0;
    let mut total = 0.0;
    let mut optimal = true;
    for maze in rotations {
        let params = RewardParams::normalized(maze.path_len());
        let result = run_episode(&mut GreedyPolicy(learner), maze, &params, default_max_steps(maze));
        successes += result.success as usize;
        total += result.normalized_return;
        optimal &= result.is_optimal(maze);
    }
    EvalRecord {
        step,
        success_rate: successes as f64 / rotations.len() as f64,
        mean_normalized_return: total / rotations.len() as f64,
        optimal,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageOutcome {
    pub consumed: u64,
    pub early_stop: bool,
    pub evaluations: Vec<EvalRecord>,
}

/// Trains for at most `allotted` steps. Evaluation runs before the first step,
/// every `eval_interval` steps, and when the allotment runs out.
pub fn train_stage<L: Learner + ?Sized>(
    learner: &mut L,
    train: &Maze,
    eval: &Maze,
    allotted: u64,
    config: &TrainConfig,
    progress: Option<&AtomicU64>,
) -> StageOutcome {
    let train_rot = train.rotations();
    let eval_rot = eval.rotations();
    let params = RewardParams::raw(train.path_len());
    let mut evaluations = vec![evaluate_greedy(learner, &eval_rot, 0)];
    if evaluations[0].optimal {
        return StageOutcome {
            consumed: 0,
            early_stop: true,
            evaluations,
        };
    }
    let mut episode = 0usize;
    let mut env = Env::new(&train_rot[0], params);
    let mut obs = env.reset();
    let mut steps = 0u64;
    while steps < allotted {
        let epsilon = config.epsilon(steps, allotted);
        let action = learner.act(&obs, epsilon);
        let step = env.step(action).expect("episodes are reset when done");
        learner.learn(&Transition {
            observation: obs,
            action,
            reward: step.reward,
            next: step.observation,
            terminal: step.terminal,
        });
        steps += 1;
        obs = step.observation;
        if step.done() {
            episode += 1;
            env = Env::new(&train_rot[episode % 4], params);
            obs = env.reset();
        }
        if steps.is_multiple_of(config.eval_interval) || steps == allotted {
            if let Some(p) = progress {
                p.store(steps, Ordering::Relaxed);
            }
            let record = evaluate_greedy(learner, &eval_rot, steps);
            let optimal = record.optimal;
            evaluations.push(record);
            if optimal {
                return StageOutcome {
                    consumed: steps,
                    early_stop: true,
                    evaluations,
                };
            }
        }
    }
    StageOutcome {
        consumed: steps,
        early_stop: false,
        evaluations,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Direct,
    Interpolation,
    Edhucat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub candidate: usize,
    /// Candidate of the previous stage this learner was copied from.
    pub parent: Option<usize>,
    pub train: MazeSpec,
    pub eval: MazeSpec,
    pub allotted: u64,
    pub consumed: u64,
    pub early_stop: bool,
    pub evaluations: Vec<EvalRecord>,
    /// Final greedy evaluation on a separate target maze, when one is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_evaluation: Option<EvalRecord>,
}

impl StageRecord {
    pub fn last_evaluation(&self) -> &EvalRecord {
        self.evaluations.last().expect("stages always evaluate at least once")
    }
}

/// Outcome of a training regime. The ledger part serializes to JSON; the
/// final learner snapshot and the decision log are stored beside it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRun {
    pub regime: Regime,
    pub budget: u64,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
    /// Candidate chosen at the end, for regimes with several candidates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected: Option<usize>,
    #[serde(skip)]
    pub final_snapshot: Vec<u8>,
    #[serde(skip)]
    pub decisions: DecisionLog,
}

pub const LEDGER_FILE: &str = "ledger.json";
pub const SNAPSHOT_FILE: &str = "learner.amzq";
pub const DECISIONS_FILE: &str = "decisions.jsonl";

impl TrainingRun {
    pub fn consumed(&self) -> u64 {
        self.stages.iter().map(|s| s.consumed).sum()
    }

    /// Whether the last stage of the run (or the selected candidate's last
    /// stage) ended with all evaluation rotations optimal.
    pub fn solved(&self) -> bool {
        let Some(last_stage) = self.stages.last().map(|s| s.stage) else {
            return false;
        };
        let candidate = self.selected.unwrap_or(0);
        self.stages
            .iter()
            .find(|s| s.stage == last_stage && s.candidate == candidate)
            .is_some_and(|s| s.last_evaluation().optimal)
    }

    pub fn ledger_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger serializes") + "\n"
    }

    pub fn save(&self, dir: &Path) -> Result<(), TrainError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(LEDGER_FILE), self.ledger_json())?;
        fs::write(dir.join(SNAPSHOT_FILE), &self.final_snapshot)?;
        if self.regime == Regime::Edhucat {
            fs::write(dir.join(DECISIONS_FILE), self.decisions.to_jsonl())?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<TrainingRun, TrainError> {
        let mut run: TrainingRun = serde_json::from_str(&fs::read_to_string(dir.join(LEDGER_FILE))?)?;
        run.final_snapshot = fs::read(dir.join(SNAPSHOT_FILE))?;
        let decisions = dir.join(DECISIONS_FILE);
        if decisions.exists() {
            run.decisions = DecisionLog::from_jsonl(&fs::read_to_string(decisions)?)?;
        }
        Ok(run)
    }
}

/// Seed of the exploration stream for one stage-training.
pub fn stage_seed(run_seed: u64, stage: usize, candidate: usize) -> u64 {
    derive_seed(run_seed, &[stage as u64, candidate as u64])
}

pub fn train_direct<L: Learner + ?Sized>(
    learner: &mut L,
    train: &MazeSpec,
    eval: &MazeSpec,
    budget: u64,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainingRun, TrainError> {
    let plan = [StagePlan {
        train: train.clone(),
        eval: eval.clone(),
    }];
    let mut run = train_staged(learner, &plan, budget, false, config, seed)?;
    run.regime = Regime::Direct;
    Ok(run)
}

/// Per-field interpolation between two specs.
///
/// Width, height, `p_lure` and `p_trap` follow a straight line (sizes
/// rounded half away from zero). The intersection allowance runs from 0 for
/// a unicursive endpoint to 1 otherwise; a stage is unicursive exactly when
/// its allowance is zero, and unicursive stages carry no lures or traps.
/// Glyph sets and the start corner switch to the final spec's at stage
/// `stages / 2`; a kind whose probability is positive borrows the other
/// endpoint's glyphs when its own list is empty. Intermediate stages use seed
/// `initial.seed + i`; both endpoints are kept verbatim.
pub fn interpolate_specs(initial: &MazeSpec, last: &MazeSpec, stages: usize) -> Result<Vec<MazeSpec>, TrainError> {
    if stages < 2 {
        return Err(TrainError::Config(format!("interpolation needs at least 2 stages, got {stages}")));
    }
    initial.validate()?;
    last.validate()?;
    let span = (stages - 1) as f64;
    let lerp = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / span;
    let allowance = |s: &MazeSpec| if s.unicursive { 0.0 } else { 1.0 };
    let pick_glyphs = |late: bool, a: &Vec<Glyph>, b: &Vec<Glyph>| {
        let (own, other) = if late { (b, a) } else { (a, b) };
        if own.is_empty() {
            other.clone()
        } else {
            own.clone()
        }
    };
    let mut out = Vec::with_capacity(stages);
    for i in 0..stages {
        if i == 0 {
            out.push(initial.clone());
            continue;
        }
        if i == stages - 1 {
            out.push(last.clone());
            continue;
        }
        let late = i >= stages / 2;
        let unicursive = lerp(allowance(initial), allowance(last), i) == 0.0;
        let (p_lure, p_trap) = if unicursive {
            (0.0, 0.0)
        } else {
            (lerp(initial.p_lure, last.p_lure, i), lerp(initial.p_trap, last.p_trap, i))
        };
        let lure_glyphs = if p_lure > 0.0 {
            pick_glyphs(late, &initial.lure_glyphs, &last.lure_glyphs)
        } else if late {
            last.lure_glyphs.clone()
        } else {
            initial.lure_glyphs.clone()
        };
        let trap_glyphs = if p_trap > 0.0 {
            pick_glyphs(late, &initial.trap_glyphs, &last.trap_glyphs)
        } else if late {
            last.trap_glyphs.clone()
        } else {
            initial.trap_glyphs.clone()
        };
        let spec = MazeSpec {
            width: lerp(initial.width as f64, last.width as f64, i).round() as u32,
            height: lerp(initial.height as f64, last.height as f64, i).round() as u32,
            seed: initial.seed.wrapping_add(i as u64),
            start_corner: if late { last.start_corner } else { initial.start_corner },
            unicursive,
            clue_glyphs: if late { last.clue_glyphs.clone() } else { initial.clue_glyphs.clone() },
            lure_glyphs,
            p_lure,
            trap_glyphs,
            p_trap,
        };
        spec.validate()?;
        out.push(spec);
    }
    Ok(out)
}

/// One stage of a staged regime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub train: MazeSpec,
    pub eval: MazeSpec,
}

/// Equal split with the integer remainder on the last stage.
pub fn split_budget(budget: u64, stages: usize) -> Vec<u64> {
    let n = stages as u64;
    let mut shares = vec![budget / n; stages];
    if let Some(last) = shares.last_mut() {
        *last += budget % n;
    }
    shares
}

/// Spreads `unused` steps equally over the stages after `from`, the
/// integer remainder going to the last stage.
pub fn transfer_remainder(allotments: &mut [u64], from: usize, unused: u64) {
    let remaining = allotments.len().saturating_sub(from + 1) as u64;
    if remaining == 0 || unused == 0 {
        return;
    }
    for a in &mut allotments[from + 1..] {
        *a += unused / remaining;
    }
    *allotments.last_mut().expect("non-empty") += unused % remaining;
}

/// Trains through `plans` in order with one learner. With `transfer`, steps
/// left over by an early stop move to the later stages.
pub fn train_staged<L: Learner + ?Sized>(
    learner: &mut L,
    plans: &[StagePlan],
    budget: u64,
    transfer: bool,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainingRun, TrainError> {
    config.validate()?;
    if plans.is_empty() {
        return Err(TrainError::Config("at least one stage is required".into()));
    }
    if budget == 0 {
        return Err(TrainError::Config("budget must be at least 1".into()));
    }
    let mazes: Vec<(Maze, Maze)> = plans
        .iter()
        .map(|p| Ok((Maze::generate(&p.train)?, Maze::generate(&p.eval)?)))
        .collect::<Result<_, TrainError>>()?;
    let mut allotments = split_budget(budget, plans.len());
    let mut stages = Vec::with_capacity(plans.len());
    for (i, (plan, (train, eval))) in plans.iter().zip(&mazes).enumerate() {
        learner.reseed(stage_seed(seed, i, 0));
        let outcome = train_stage(learner, train, eval, allotments[i], config, None);
        if transfer {
            let unused = allotments[i] - outcome.consumed;
            transfer_remainder(&mut allotments, i, unused);
        }
        stages.push(StageRecord {
            stage: i,
            candidate: 0,
            parent: (i > 0).then_some(0),
            train: plan.train.clone(),
            eval: plan.eval.clone(),
            allotted: allotments[i],
            consumed: outcome.consumed,
            early_stop: outcome.early_stop,
            evaluations: outcome.evaluations,
            target_evaluation: None,
        });
    }
    Ok(TrainingRun {
        regime: Regime::Interpolation,
        budget,
        seed,
        stages,
        selected: None,
        final_snapshot: learner.snapshot(),
        decisions: DecisionLog::default(),
    })
}

/// Interpolation scaffolding: intermediate stages stop early once their own
/// maze is solved, the last stage is judged on `eval`.
pub fn train_interpolation<L: Learner + ?Sized>(
    learner: &mut L,
    stage_specs: &[MazeSpec],
    eval: &MazeSpec,
    budget: u64,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainingRun, TrainError> {
    let plans: Vec<StagePlan> = stage_specs
        .iter()
        .enumerate()
        .map(|(i, s)| StagePlan {
            train: s.clone(),
            eval: if i + 1 == stage_specs.len() { eval.clone() } else { s.clone() },
        })
        .collect();
    train_staged(learner, &plans, budget, true, config, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::StartCorner;

    #[test]
    fn epsilon_schedule() {
        let c = TrainConfig::default();
        assert_eq!(c.epsilon(0, 100), 1.0);
        assert!((c.epsilon(25, 100) - 0.525).abs() < 1e-12);
        assert_eq!(c.epsilon(50, 100), 0.05);
        assert_eq!(c.epsilon(99, 100), 0.05);
    }

    #[test]
    fn budget_transfer_arithmetic() {
        let mut a = split_budget(3_000_000, 10);
        assert!(a.iter().all(|&x| x == 300_000));
        transfer_remainder(&mut a, 0, 200_000);
        assert_eq!(a[1], 322_222);
        assert_eq!(a[8], 322_222);
        assert_eq!(a[9], 322_224);
        assert_eq!(split_budget(10, 3), vec![3, 3, 4]);
    }

    #[test]
    fn interpolation_widths() {
        let initial = MazeSpec::new(5, 5, 0).unicursive();
        let last = MazeSpec::new(20, 20, 0)
            .with_lures(0.25, Glyph::LURE)
            .with_traps(0.25, Glyph::TRAP);
        let specs = interpolate_specs(&initial, &last, 10).unwrap();
        let widths: Vec<u32> = specs.iter().map(|s| s.width).collect();
        assert_eq!(widths, vec![5, 7, 8, 10, 12, 13, 15, 17, 18, 20]);
        assert!(specs[0].unicursive && !specs[1].unicursive);
        assert_eq!(specs[9], last);
        assert_eq!(specs[3].seed, 3);
    }

    #[test]
    fn interpolation_edges() {
        let s = MazeSpec::new(6, 6, 4);
        assert_eq!(interpolate_specs(&s, &s, 2).unwrap(), vec![s.clone(), s.clone()]);
        assert!(interpolate_specs(&s, &s, 1).is_err());
        let mut t = s.clone();
        t.start_corner = StartCorner::NE;
        let specs = interpolate_specs(&s, &t, 4).unwrap();
        assert_eq!(specs[1].start_corner, StartCorner::SW);
        assert_eq!(specs[2].start_corner, StartCorner::NE);
    }

    #[test]
    fn one_step_budget() {
        let spec = MazeSpec::new(6, 6, 1);
        let run = train_direct(&mut TabularQ::default(), &spec, &spec, 1, &TrainConfig::default(), 0).unwrap();
        assert_eq!(run.consumed(), 1);
        assert!(!run.stages[0].early_stop);
        assert_eq!(run.stages[0].evaluations.len(), 2);
    }
}
