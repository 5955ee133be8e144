//! Episodic stepping over a maze.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::EnvError;
use crate::geometry::{Cell, Direction};
use crate::maze::Maze;
use crate::observe::{observe_discrete, GlyphValues, Observation};
use crate::rng::{Pcg32, POLICY_STREAM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardPreset {
    Raw,
    Normalized,
}

/// Elementary rewards. Penalties are stored as positive magnitudes and
/// always subtracted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub preset: RewardPreset,
    pub rho_e: f64,
    pub rho_w: f64,
    pub rho_b: f64,
    pub rho_t: f64,
}

impl RewardParams {
    /// `l` is the number of cells on the optimal path.
    pub fn raw(l: usize) -> Self {
        RewardParams {
            preset: RewardPreset::Raw,
            rho_e: 2.0 * l as f64 - 1.0,
            rho_w: 0.1,
            rho_b: 0.2,
            rho_t: 1.0,
        }
    }

    pub fn normalized(l: usize) -> Self {
        RewardParams {
            preset: RewardPreset::Normalized,
            rho_e: 2.0,
            rho_w: 0.01,
            rho_b: 0.02,
            rho_t: 1.0 / (l as f64 - 1.0),
        }
    }

    pub fn for_maze(preset: RewardPreset, maze: &Maze) -> Self {
        match preset {
            RewardPreset::Raw => Self::raw(maze.path_len()),
            RewardPreset::Normalized => Self::normalized(maze.path_len()),
        }
    }

    #[inline]
    pub fn reward(&self, event: StepEvent) -> f64 {
        match event {
            StepEvent::Move => -self.rho_t,
            StepEvent::Backward => -self.rho_t - self.rho_b,
            StepEvent::Collision => -self.rho_t - self.rho_w,
            StepEvent::Goal => self.rho_e - self.rho_t,
        }
    }
}

/// What a single action did.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepEvent {
    Move,
    Backward,
    Collision,
    Goal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvState {
    pub pos: Cell,
    pub prev: Option<Cell>,
    pub steps: u32,
    pub done: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub observation: Observation,
    pub reward: f64,
    pub event: StepEvent,
    /// The goal was reached.
    pub terminal: bool,
    /// The step cap was reached without reaching the goal.
    pub truncated: bool,
}

impl Step {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

/// Default cap: eight times the optimal path length.
pub fn default_max_steps(maze: &Maze) -> u32 {
    8 * maze.path_len() as u32
}

#[derive(Clone, Debug)]
pub struct Env<'m> {
    maze: &'m Maze,
    params: RewardParams,
    max_steps: u32,
    state: EnvState,
}

impl<'m> Env<'m> {
    pub fn new(maze: &'m Maze, params: RewardParams) -> Self {
        Env {
            maze,
            params,
            max_steps: default_max_steps(maze),
            state: EnvState {
                pos: maze.start(),
                prev: None,
                steps: 0,
                done: false,
            },
        }
    }

    pub fn with_max_steps(mut self, max_steps: u32) -> Self {
        self.max_steps = max_steps.max(1);
        self
    }

    pub fn maze(&self) -> &'m Maze {
        self.maze
    }

    pub fn params(&self) -> &RewardParams {
        &self.params
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn max_steps(&self) -> u32 {
        self.max_steps
    }

    pub fn reset(&mut self) -> Observation {
        self.state = EnvState {
            pos: self.maze.start(),
            prev: None,
            steps: 0,
            done: false,
        };
        self.observation()
    }

    pub fn observation(&self) -> Observation {
        observe_discrete(self.maze, self.state.pos, self.state.prev)
    }

    pub fn step(&mut self, action: Direction) -> Result<Step, EnvError> {
        if self.state.done {
            return Err(EnvError::EpisodeFinished);
        }
        let here = self.state.pos;
        let event = if self.maze.has_wall(here, action) {
            StepEvent::Collision
        } else {
            let next = self
                .maze
                .neighbor(here, action)
                .expect("open walls never face the border");
            let backward = self.state.prev == Some(next);
            self.state.prev = Some(here);
            self.state.pos = next;
            if next == self.maze.goal() {
                StepEvent::Goal
            } else if backward {
                StepEvent::Backward
            } else {
                StepEvent::Move
            }
        };
        self.state.steps += 1;
        let terminal = event == StepEvent::Goal;
        let truncated = !terminal && self.state.steps >= self.max_steps;
        self.state.done = terminal || truncated;
        Ok(Step {
            observation: self.observation(),
            reward: self.params.reward(event),
            event,
            terminal,
            truncated,
        })
    }
}

/// Maps observations to actions. `begin_episode` lets stateful policies
/// reset; most policies ignore the maze.
pub trait Policy {
    fn begin_episode(&mut self, _maze: &Maze) {}
    fn act(&mut self, observation: &Observation) -> Direction;
}

/// Adapts a closure into a [`Policy`].
pub struct FnPolicy<F>(pub F);

impl<F: FnMut(&Observation) -> Direction> Policy for FnPolicy<F> {
    fn act(&mut self, observation: &Observation) -> Direction {
        (self.0)(observation)
    }
}

impl<P: Policy + ?Sized> Policy for &mut P {
    fn begin_episode(&mut self, maze: &Maze) {
        (**self).begin_episode(maze)
    }

    fn act(&mut self, observation: &Observation) -> Direction {
        (**self).act(observation)
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn begin_episode(&mut self, maze: &Maze) {
        (**self).begin_episode(maze)
    }

    fn act(&mut self, observation: &Observation) -> Direction {
        (**self).act(observation)
    }
}

/// Replays the optimal path of the maze given to `begin_episode`.
#[derive(Clone, Debug, Default)]
pub struct PathFollower {
    moves: Vec<Direction>,
    next: usize,
}

impl Policy for PathFollower {
    fn begin_episode(&mut self, maze: &Maze) {
        self.moves = maze
            .optimal_path()
            .windows(2)
            .map(|w| w[0].direction_to(w[1]).expect("path cells are adjacent"))
            .collect();
        self.next = 0;
    }

    fn act(&mut self, _observation: &Observation) -> Direction {
        let d = self.moves.get(self.next).copied().unwrap_or(Direction::East);
        self.next += 1;
        d
    }
}

/// Purely local rule: follow clues, take the other branch at traps, ignore
/// lures, never turn back unless cornered.
#[derive(Clone, Copy, Debug, Default)]
pub struct LocalRulePolicy {
    pub glyphs: GlyphValues,
}

impl Policy for LocalRulePolicy {
    fn act(&mut self, obs: &Observation) -> Direction {
        let walls = obs.walls();
        let origin = obs.origin();
        let mut exits = walls.complement();
        if let Some(o) = origin {
            exits = exits.without(o);
        }
        if let Some((d, value)) = obs.sign() {
            if value == self.glyphs.clue.value() && exits.contains(d) {
                return d;
            }
            if value == self.glyphs.trap.value() {
                if let Some(other) = exits.without(d).iter().next() {
                    return other;
                }
            }
        }
        exits
            .iter()
            .next()
            .or(origin)
            .unwrap_or(Direction::East)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantPolicy(pub Direction);

impl Policy for ConstantPolicy {
    fn act(&mut self, _observation: &Observation) -> Direction {
        self.0
    }
}

/// Uniformly random actions from a seeded stream.
#[derive(Clone, Debug)]
pub struct RandomPolicy {
    rng: Pcg32,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        RandomPolicy {
            rng: Pcg32::new(seed, POLICY_STREAM),
        }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _observation: &Observation) -> Direction {
        Direction::from_index(self.rng.below(4) as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub trajectory: Vec<Cell>,
    pub actions: Vec<Direction>,
    /// Cumulative raw reward R.
    pub raw_return: f64,
    /// Cumulative normalized reward R-bar.
    pub normalized_return: f64,
    pub success: bool,
    pub steps: u32,
    pub collisions: u32,
    pub backward_steps: u32,
}

impl EpisodeResult {
    /// Reached the goal in `l - 1` steps without a single error.
    pub fn is_optimal(&self, maze: &Maze) -> bool {
        self.success
            && self.collisions == 0
            && self.backward_steps == 0
            && self.steps as usize + 1 == maze.path_len()
    }
}

/// One line of an episode trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: u32,
    pub position: Cell,
    pub action: Direction,
    pub reward: f64,
    pub event: StepEvent,
    pub observation: Observation,
}

pub fn trace_to_jsonl(trace: &[TraceStep]) -> String {
    trace
        .iter()
        .map(|s| serde_json::to_string(s).expect("trace steps serialize") + "\n")
        .collect()
}

/// Runs one episode, accumulating the raw and normalized returns together.
/// The trace records per-step rewards under `params`.
pub fn run_episode_traced<P: Policy + ?Sized>(
    policy: &mut P,
    maze: &Maze,
    params: &RewardParams,
    max_steps: u32,
) -> (EpisodeResult, Vec<TraceStep>) {
    let raw = RewardParams::raw(maze.path_len());
    let norm = RewardParams::normalized(maze.path_len());
    let mut env = Env::new(maze, *params).with_max_steps(max_steps);
    let mut obs = env.reset();
    policy.begin_episode(maze);
    let mut result = EpisodeResult {
        trajectory: vec![maze.start()],
        actions: Vec::new(),
        raw_return: 0.0,
        normalized_return: 0.0,
        success: false,
        steps: 0,
        collisions: 0,
        backward_steps: 0,
    };
    let mut trace = Vec::new();
    loop {
        let position = env.state().pos;
        let action = policy.act(&obs);
        let step = env.step(action).expect("episode is live");
        result.actions.push(action);
        result.raw_return += raw.reward(step.event);
        result.normalized_return += norm.reward(step.event);
        match step.event {
            StepEvent::Collision => result.collisions += 1,
            StepEvent::Backward => result.backward_steps += 1,
            _ => {}
        }
        if step.event != StepEvent::Collision {
            result.trajectory.push(env.state().pos);
        }
        trace.push(TraceStep {
            step: env.state().steps,
            position,
            action,
            reward: step.reward,
            event: step.event,
            observation: obs,
        });
        obs = step.observation;
        if step.done() {
            result.success = step.terminal;
            break;
        }
    }
    result.steps = env.state().steps;
    (result, trace)
}

pub fn run_episode<P: Policy + ?Sized>(
    policy: &mut P,
    maze: &Maze,
    params: &RewardParams,
    max_steps: u32,
) -> EpisodeResult {
    run_episode_traced(policy, maze, params, max_steps).0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub descriptor: String,
    pub steps: u64,
    pub episodes: u64,
    pub wall_seconds: f64,
    pub steps_per_second: f64,
    pub ms_per_1000_steps: f64,
}

/// Steps a seeded random policy through the maze, resetting on episode end.
pub fn bench_stepping(maze: &Maze, steps: u64, seed: u64) -> BenchReport {
    let params = RewardParams::raw(maze.path_len());
    let mut env = Env::new(maze, params);
    let mut policy = RandomPolicy::new(seed);
    let mut obs = env.reset();
    let mut episodes = 1;
    let mut sink = 0.0;
    let started = Instant::now();
    for _ in 0..steps {
        let step = env.step(policy.act(&obs)).expect("episode is live");
        sink += step.reward;
        obs = step.observation;
        if step.done() {
            obs = env.reset();
            episodes += 1;
        }
    }
    let wall = started.elapsed().as_secs_f64();
    std::hint::black_box(sink);
    BenchReport {
        descriptor: maze.descriptor(),
        steps,
        episodes,
        wall_seconds: wall,
        steps_per_second: if wall > 0.0 { steps as f64 / wall } else { f64::INFINITY },
        ms_per_1000_steps: if steps > 0 { wall * 1e6 / steps as f64 } else { 0.0 },
    }
}
