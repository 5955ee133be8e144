//! Generalization harnesses: the 18-maze navigation suite and the
//! exhaustive input-processing audit.

use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexity::{deceptiveness, select_percentiles, surprisingness};
use crate::env::{default_max_steps, run_episode, Policy, RewardParams};
use crate::maze::{Maze, SignKind};
use crate::observe::{enumerate_discrete_inputs, AuditInput, InputClass};
use crate::spec::{Glyph, MazeClass, MazeSpec};

/// Columns of the navigation suite, in display order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SuiteColumn {
    Trivial,
    Simple,
    Lures,
    Traps1,
    Traps3,
    Traps16,
}

impl SuiteColumn {
    pub const ALL: [SuiteColumn; 6] = [
        SuiteColumn::Trivial,
        SuiteColumn::Simple,
        SuiteColumn::Lures,
        SuiteColumn::Traps1,
        SuiteColumn::Traps3,
        SuiteColumn::Traps16,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SuiteColumn::Trivial => "Trivial",
            SuiteColumn::Simple => "Simple",
            SuiteColumn::Lures => "Lures",
            SuiteColumn::Traps1 => "1 Trap",
            SuiteColumn::Traps3 => "3 Traps",
            SuiteColumn::Traps16 => "16 Traps",
        }
    }

    /// Exact trap count required by the trap columns.
    pub fn trap_count(self) -> Option<usize> {
        match self {
            SuiteColumn::Traps1 => Some(1),
            SuiteColumn::Traps3 => Some(3),
            SuiteColumn::Traps16 => Some(16),
            _ => None,
        }
    }

    /// Spec used for seed `seed` of this column. Trap columns carry lures
    /// at 0.25 and a per-column trap probability that makes the wanted
    /// count reasonably frequent on a 20x20 maze.
    pub fn spec(self, seed: u64) -> MazeSpec {
        let base = MazeSpec::new(SUITE_SIDE, SUITE_SIDE, seed);
        let with_traps = |p: f64| {
            base.clone()
                .with_lures(0.25, Glyph::LURE)
                .with_traps(p, Glyph::TRAP)
        };
        match self {
            SuiteColumn::Trivial => MazeClass::Trivial.apply(&base),
            SuiteColumn::Simple => base,
            SuiteColumn::Lures => base.with_lures(0.25, Glyph::LURE),
            SuiteColumn::Traps1 => with_traps(0.1),
            SuiteColumn::Traps3 => with_traps(0.25),
            SuiteColumn::Traps16 => with_traps(0.9),
        }
    }
}

pub const SUITE_SIDE: u32 = 20;
pub const DEFAULT_SUITE_SAMPLE: usize = 10_000;
pub const SUITE_ROWS: [(&str, f64); 3] = [("min", 0.0), ("median", 50.0), ("max", 100.0)];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub column: SuiteColumn,
    pub row: String,
    pub spec: MazeSpec,
    pub surprisingness: f64,
    pub deceptiveness: f64,
}

/// Draws `sample_size` mazes per column from seeds `base_seed, base_seed + 1,
/// ...` (skipping, in trap columns, seeds whose realized trap count is off)
/// and keeps the minimum, median and maximum by surprisingness. Entries come
/// out column by column, rows in min/median/max order.
pub fn build_generalization_suite(base_seed: u64, sample_size: usize) -> Vec<SuiteEntry> {
    assert!(sample_size >= 1, "sample_size must be at least 1");
    SuiteColumn::ALL
        .iter()
        .flat_map(|&column| {
            let population = sample_column(column, base_seed, sample_size);
            let picked = select_percentiles(population, &SUITE_ROWS.map(|r| r.1));
            picked
                .into_iter()
                .zip(SUITE_ROWS)
                .map(move |(sel, (row, _))| SuiteEntry {
                    column,
                    row: row.to_string(),
                    spec: sel.maze.spec().clone(),
                    surprisingness: sel.surprisingness,
                    deceptiveness: deceptiveness(&sel.maze),
                })
        })
        .collect()
}

fn sample_column(column: SuiteColumn, base_seed: u64, sample_size: usize) -> Vec<(Maze, f64)> {
    const CHUNK: u64 = 4096;
    let mut accepted = Vec::with_capacity(sample_size);
    let mut offset = 0u64;
    while accepted.len() < sample_size {
        let chunk: Vec<Option<(Maze, f64)>> = (offset..offset + CHUNK)
            .into_par_iter()
            .map(|j| {
                let maze = Maze::generate(&column.spec(base_seed.wrapping_add(j))).expect("suite specs are valid");
                if let Some(n) = column.trap_count() {
                    if maze.count_signs(SignKind::Trap) != n {
                        return None;
                    }
                }
                let s = surprisingness(&maze);
                Some((maze, s))
            })
            .collect();
        accepted.extend(chunk.into_iter().flatten().take(sample_size - accepted.len()));
        offset += CHUNK;
    }
    accepted
}

pub fn suite_to_csv(entries: &[SuiteEntry]) -> String {
    let mut out = String::from("column,row,descriptor,surprisingness,deceptiveness\n");
    for e in entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.column.label(),
            e.row,
            e.spec.descriptor(),
            e.surprisingness,
            e.deceptiveness
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub descriptor: String,
    /// Reached the goal on all four rotations.
    pub success: bool,
    /// Normalized return averaged over the four rotations.
    pub normalized_return: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub rows: Vec<SuiteRow>,
    pub success_rate: f64,
    pub mean_normalized_return: f64,
}

impl SuiteResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("descriptor,success,normalized_return\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.descriptor, r.success, r.normalized_return);
        }
        out
    }

    pub fn summary(&self) -> String {
        let solved = self.rows.iter().filter(|r| r.success).count();
        format!(
            "navigation: {solved}/{} mazes solved on all rotations (rate {:.3}), mean normalized return {:.4}\n",
            self.rows.len(),
            self.success_rate,
            self.mean_normalized_return
        )
    }
}

/// Runs `policy` (a fresh clone per episode) on all four rotations of each
/// maze under normalized rewards. Rows keep the input order.
///
/// # Panics
/// If `mazes` is empty.
pub fn evaluate_navigation<P>(policy: &P, mazes: &[Maze]) -> SuiteResult
where
    P: Policy + Clone + Send + Sync,
{
    assert!(!mazes.is_empty(), "the maze list must be non-empty");
    let rows: Vec<SuiteRow> = mazes
        .par_iter()
        .map(|maze| {
            let mut success = true;
            let mut total = 0.0;
            for rotated in maze.rotations() {
                let params = RewardParams::normalized(rotated.path_len());
                let result = run_episode(&mut policy.clone(), &rotated, &params, default_max_steps(&rotated));
                success &= result.success;
                total += result.normalized_return;
            }
            SuiteRow {
                descriptor: maze.descriptor(),
                success,
                normalized_return: total / 4.0,
            }
        })
        .collect();
    let n = rows.len() as f64;
    SuiteResult {
        success_rate: rows.iter().filter(|r| r.success).count() as f64 / n,
        mean_normalized_return: rows.iter().map(|r| r.normalized_return).sum::<f64>() / n,
        rows,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassRate {
    pub class: InputClass,
    pub correct: usize,
    pub total: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    /// Empty, lure, clue, trap, in that order.
    pub classes: Vec<ClassRate>,
    /// Unweighted mean of the class rates.
    pub overall: f64,
}

impl AuditResult {
    pub fn rate(&self, class: InputClass) -> f64 {
        self.classes
            .iter()
            .find(|c| c.class == class)
            .map_or(0.0, |c| c.rate)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,correct,total,rate\n");
        for c in &self.classes {
            let _ = writeln!(out, "{},{},{},{}", c.class, c.correct, c.total, c.rate);
        }
        let _ = writeln!(out, "overall,,,{}", self.overall);
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::from("input audit:\n");
        for c in &self.classes {
            let _ = writeln!(out, "  {:<6} {:>3}/{:<3} {:.3}", c.class.name(), c.correct, c.total, c.rate);
        }
        let _ = writeln!(out, "  overall {:.3}", self.overall);
        out
    }
}

/// Scores one action per input of `inputs`.
pub fn audit_inputs<P: Policy + ?Sized>(policy: &mut P, inputs: &[AuditInput]) -> AuditResult {
    let classes: Vec<ClassRate> = InputClass::ALL
        .iter()
        .map(|&class| {
            let (mut correct, mut total) = (0, 0);
            for input in inputs.iter().filter(|i| i.class == class) {
                total += 1;
                correct += input.correct.contains(policy.act(&input.observation)) as usize;
            }
            ClassRate {
                class,
                correct,
                total,
                rate: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
            }
        })
        .collect();
    let overall = classes.iter().map(|c| c.rate).sum::<f64>() / classes.len() as f64;
    AuditResult { classes, overall }
}

/// Exhaustive audit over every valid mid-episode observation.
pub fn input_audit<P: Policy + ?Sized>(policy: &mut P) -> AuditResult {
    audit_inputs(policy, &enumerate_discrete_inputs())
}
