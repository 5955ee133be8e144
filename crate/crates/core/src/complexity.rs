//! Entropy-based maze metrics: surprisingness and deceptiveness.
//!
//! Both are computed from integer counts. Terms are summed after sorting
//! the counts, so the result depends only on the multiset of counts and is
//! exactly invariant under rotation.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Env, PathFollower, Policy, RewardParams};
use crate::maze::{Maze, SignKind};
use crate::observe::{observe_discrete, ObsKey, Observation};
use crate::spec::{MazeClass, MazeSpec};

/// Which cells make up the state population of the deceptiveness metric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatePopulation {
    /// Observations met along the optimal trajectory.
    #[default]
    OptimalPath,
    /// Every cell reachable from the start, observed as if entered from its
    /// parent in the breadth-first tree rooted at the start.
    AllCells,
}

/// `-sum p log2 p` over the normalized counts.
pub fn entropy_from_counts(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let mut sorted: Vec<u64> = counts.iter().copied().filter(|&c| c > 0).collect();
    sorted.sort_unstable();
    let n = total as f64;
    sorted
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        + 0.0
}

/// Observations received while following the optimal path, start and goal
/// included, paired with the sign kind of the cell they were observed in.
pub fn trajectory_states(maze: &Maze) -> Vec<(Observation, Option<SignKind>)> {
    let mut env = Env::new(maze, RewardParams::raw(maze.path_len()));
    let mut oracle = PathFollower::default();
    oracle.begin_episode(maze);
    let mut obs = env.reset();
    let mut out = vec![(obs, maze.sign(maze.start()).map(|s| s.kind))];
    loop {
        let step = env.step(oracle.act(&obs)).expect("oracle episode is live");
        obs = step.observation;
        let pos = env.state().pos;
        out.push((obs, maze.sign(pos).map(|s| s.kind)));
        if step.done() {
            break;
        }
    }
    out
}

fn all_cell_states(maze: &Maze) -> Vec<(Observation, Option<SignKind>)> {
    let mut parent = vec![None; (maze.width() * maze.height()) as usize];
    let mut seen = vec![false; parent.len()];
    let mut queue = std::collections::VecDeque::from([maze.start()]);
    seen[maze.index(maze.start())] = true;
    let mut out = Vec::new();
    while let Some(cell) = queue.pop_front() {
        let prev = parent[maze.index(cell)];
        out.push((observe_discrete(maze, cell, prev), maze.sign(cell).map(|s| s.kind)));
        for d in maze.open_directions(cell).iter() {
            if let Some(n) = maze.neighbor(cell, d) {
                let ni = maze.index(n);
                if !seen[ni] {
                    seen[ni] = true;
                    parent[ni] = Some(cell);
                    queue.push_back(n);
                }
            }
        }
    }
    out
}

fn histogram(states: &[(Observation, Option<SignKind>)]) -> BTreeMap<ObsKey, (Observation, u64)> {
    let mut hist: BTreeMap<ObsKey, (Observation, u64)> = BTreeMap::new();
    for (obs, _) in states {
        hist.entry(obs.key()).or_insert((*obs, 0)).1 += 1;
    }
    hist
}

pub fn surprisingness(maze: &Maze) -> f64 {
    let states = trajectory_states(maze);
    let counts: Vec<u64> = histogram(&states).values().map(|(_, c)| *c).collect();
    entropy_from_counts(&counts)
}

pub fn deceptiveness(maze: &Maze) -> f64 {
    deceptiveness_with(maze, StatePopulation::OptimalPath)
}

/// States are grouped by their wall channels (walls and origin); within a
/// group every distinct deceptive state `s` contributes `-p log2 p` with
/// `p` its share of the group.
pub fn deceptiveness_with(maze: &Maze, population: StatePopulation) -> f64 {
    let states = match population {
        StatePopulation::OptimalPath => trajectory_states(maze),
        StatePopulation::AllCells => all_cell_states(maze),
    };
    deceptiveness_of_states(&states)
}

pub fn deceptiveness_of_states(states: &[(Observation, Option<SignKind>)]) -> f64 {
    let mut group_sizes: HashMap<[u16; 4], u64> = HashMap::new();
    let mut deceptive: HashMap<ObsKey, u64> = HashMap::new();
    for (obs, kind) in states {
        let key = obs.key();
        let prefix = [key[0], key[1], key[2], key[3]];
        *group_sizes.entry(prefix).or_default() += 1;
        if kind.is_some_and(SignKind::is_deceptive) {
            *deceptive.entry(key).or_default() += 1;
        }
    }
    let mut pairs: Vec<(u64, u64)> = deceptive
        .iter()
        .map(|(key, &count)| (count, group_sizes[&[key[0], key[1], key[2], key[3]]]))
        .collect();
    pairs.sort_unstable();
    pairs
        .iter()
        .map(|&(count, n)| {
            let p = count as f64 / n as f64;
            -p * p.log2()
        })
        .sum::<f64>()
        + 0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramEntry {
    pub observation: Observation,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub descriptor: String,
    pub class: MazeClass,
    pub surprisingness: f64,
    pub deceptiveness: f64,
    /// Distinct observations along the optimal trajectory with their counts.
    pub histogram: Vec<HistogramEntry>,
}

pub fn report(maze: &Maze) -> ComplexityReport {
    let states = trajectory_states(maze);
    let hist = histogram(&states);
    let counts: Vec<u64> = hist.values().map(|(_, c)| *c).collect();
    ComplexityReport {
        descriptor: maze.descriptor(),
        class: maze.class(),
        surprisingness: entropy_from_counts(&counts),
        deceptiveness: deceptiveness_of_states(&states),
        histogram: hist
            .into_values()
            .map(|(observation, count)| HistogramEntry { observation, count })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub descriptor: String,
    pub class: MazeClass,
    pub surprisingness: f64,
    pub deceptiveness: f64,
}

/// Generates `count` mazes per class from `template` with seeds
/// `template.seed .. template.seed + count` and measures them. Rows come out
/// grouped by class in the given order, then by seed.
pub fn sweep(template: &MazeSpec, classes: &[MazeClass], count: usize) -> Vec<SweepRow> {
    let jobs: Vec<MazeSpec> = classes
        .iter()
        .flat_map(|class| {
            let spec = class.apply(template);
            (0..count as u64).map(move |i| spec.with_seed(template.seed.wrapping_add(i)))
        })
        .collect();
    jobs.par_iter()
        .map(|spec| {
            let maze = Maze::generate(spec).expect("class templates are valid");
            let states = trajectory_states(&maze);
            let counts: Vec<u64> = histogram(&states).values().map(|(_, c)| *c).collect();
            SweepRow {
                descriptor: spec.descriptor(),
                class: spec.class(),
                surprisingness: entropy_from_counts(&counts),
                deceptiveness: deceptiveness_of_states(&states),
            }
        })
        .collect()
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("descriptor,class,surprisingness,deceptiveness\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.descriptor, r.class, r.surprisingness, r.deceptiveness));
    }
    out
}

/// A maze picked at a given surprisingness percentile.
#[derive(Clone, Debug)]
pub struct Selected {
    pub percentile: f64,
    pub maze: Maze,
    pub surprisingness: f64,
}

/// Ranks mazes by surprisingness (ties keep input order) and returns those
/// at the requested percentiles; percentile `p` maps to rank
/// `round(p / 100 * (n - 1))`.
pub fn select_percentiles(mut population: Vec<(Maze, f64)>, percentiles: &[f64]) -> Vec<Selected> {
    assert!(!population.is_empty(), "population must be non-empty");
    population.sort_by(|a, b| a.1.total_cmp(&b.1));
    let last = population.len() - 1;
    percentiles
        .iter()
        .map(|&p| {
            assert!((0.0..=100.0).contains(&p), "percentile {p} outside [0, 100]");
            let rank = ((p / 100.0) * last as f64).round() as usize;
            let (maze, s) = &population[rank];
            Selected {
                percentile: p,
                maze: maze.clone(),
                surprisingness: *s,
            }
        })
        .collect()
}

/// Samples `sample_size` mazes of `class` (seeds `template.seed + i`) and
/// picks the ones at the given surprisingness percentiles.
pub fn percentile_select(
    template: &MazeSpec,
    class: MazeClass,
    sample_size: usize,
    percentiles: &[f64],
) -> Vec<Selected> {
    assert!(sample_size >= 1, "sample_size must be at least 1");
    let spec = class.apply(template);
    let population: Vec<(Maze, f64)> = (0..sample_size as u64)
        .into_par_iter()
        .map(|i| {
            let maze = Maze::generate(&spec.with_seed(template.seed.wrapping_add(i)))
                .expect("class templates are valid");
            let s = surprisingness(&maze);
            (maze, s)
        })
        .collect();
    select_percentiles(population, percentiles)
}
