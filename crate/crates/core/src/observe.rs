//! Agent percepts: the eight-channel discrete vector and the hybrid
//! grayscale raster of the current cell.

use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::ObserveError;
use crate::geometry::{Cell, Direction, DirectionSet};
use crate::maze::{Maze, SignKind};
use crate::spec::Glyph;

pub const WALL_VALUE: f32 = 1.0;
pub const ORIGIN_VALUE: f32 = 0.5;

/// `(W_e, W_n, W_w, W_s, S_e, S_n, S_w, S_s)`.
///
/// Equality and hashing go through [`Observation::key`], which quantizes
/// every channel to thousandths.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Observation(pub [f32; 8]);

/// Quantized observation, used as a table key.
pub type ObsKey = [u16; 8];

impl Observation {
    pub fn key(&self) -> ObsKey {
        self.0.map(|v| (v * 1000.0).round() as u16)
    }

    pub fn wall_channels(&self) -> &[f32] {
        &self.0[..4]
    }

    pub fn sign_channels(&self) -> &[f32] {
        &self.0[4..]
    }

    pub fn walls(&self) -> DirectionSet {
        Direction::ALL
            .into_iter()
            .filter(|d| self.0[d.index()] == WALL_VALUE)
            .collect()
    }

    pub fn origin(&self) -> Option<Direction> {
        Direction::ALL
            .into_iter()
            .find(|d| self.0[d.index()] == ORIGIN_VALUE)
    }

    /// Direction and value of the sign channel, if any.
    pub fn sign(&self) -> Option<(Direction, f32)> {
        Direction::ALL
            .into_iter()
            .map(|d| (d, self.0[4 + d.index()]))
            .find(|(_, v)| *v != 0.0)
    }

    /// Observation as seen after rotating the maze `quarter_turns` times
    /// counter-clockwise: channel `d` moves to channel `d + k`.
    pub fn rotated(&self, quarter_turns: u8) -> Observation {
        let mut out = [0.0; 8];
        for d in Direction::ALL {
            let r = d.rotated(quarter_turns).index();
            out[r] = self.0[d.index()];
            out[4 + r] = self.0[4 + d.index()];
        }
        Observation(out)
    }
}

impl PartialEq for Observation {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Observation {}

impl Hash for Observation {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

#[inline]
pub fn observe_discrete(maze: &Maze, pos: Cell, prev: Option<Cell>) -> Observation {
    let mut out = [0.0f32; 8];
    let walls = maze.wall_set(pos);
    for d in walls.iter() {
        out[d.index()] = WALL_VALUE;
    }
    if let Some(o) = prev.and_then(|p| pos.direction_to(p)) {
        out[o.index()] = ORIGIN_VALUE;
    }
    if let Some(sign) = maze.sign(pos) {
        out[4 + sign.direction.index()] = sign.glyph.value();
    }
    Observation(out)
}

/// Square grayscale raster; row 0 is the northern edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRaster {
    pub resolution: u32,
    pub pixels: Vec<f32>,
}

impl CellRaster {
    pub fn get(&self, row: u32, col: u32) -> f32 {
        self.pixels[(row * self.resolution + col) as usize]
    }

    /// Binary 8-bit PGM (`P5`).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{0} {0}\n255\n", self.resolution).into_bytes();
        out.extend(self.pixels.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }
}

/// Width of the border bands used for walls and the origin marker.
pub fn band_width(resolution: u32) -> u32 {
    (resolution / 8).max(1)
}

/// Renders a cell: walls are full-intensity bands along their side, the
/// origin side is a half-intensity band, and a sign is a filled triangle
/// pointing toward its direction whose intensity is the glyph value.
pub fn render_cell(
    maze: &Maze,
    pos: Cell,
    prev: Option<Cell>,
    resolution: u32,
) -> Result<CellRaster, ObserveError> {
    if resolution < 8 {
        return Err(ObserveError::Resolution(resolution));
    }
    if !maze.contains(pos) {
        return Err(ObserveError::OutOfBounds { x: pos.x, y: pos.y });
    }
    let r = resolution;
    let band = band_width(r);
    let mut pixels = vec![0.0f32; (r * r) as usize];

    if let Some(sign) = maze.sign(pos) {
        draw_triangle(&mut pixels, r, band, sign.direction, sign.glyph.value());
    }
    let mut paint_band = |d: Direction, value: f32| {
        for row in 0..r {
            for col in 0..r {
                let inside = match d {
                    Direction::East => col >= r - band,
                    Direction::North => row < band,
                    Direction::West => col < band,
                    Direction::South => row >= r - band,
                };
                if inside {
                    let px = &mut pixels[(row * r + col) as usize];
                    *px = px.max(value);
                }
            }
        }
    };
    if let Some(o) = prev.and_then(|p| pos.direction_to(p)) {
        paint_band(o, ORIGIN_VALUE);
    }
    for d in maze.wall_set(pos).iter() {
        paint_band(d, WALL_VALUE);
    }
    Ok(CellRaster { resolution: r, pixels })
}

fn draw_triangle(pixels: &mut [f32], r: u32, band: u32, dir: Direction, value: f32) {
    let c = r as f64 / 2.0;
    let half = (c - band as f64) * 0.7;
    for row in 0..r {
        for col in 0..r {
            // Pixel center relative to the cell center, y pointing north.
            let px = col as f64 + 0.5 - c;
            let py = c - (row as f64 + 0.5);
            // Express in a frame where the arrow points east.
            let (u, v) = match dir {
                Direction::East => (px, py),
                Direction::North => (py, -px),
                Direction::West => (-px, -py),
                Direction::South => (-py, px),
            };
            if u >= -half && u <= half && v.abs() <= (half - u) / 2.0 {
                pixels[(row * r + col) as usize] = value;
            }
        }
    }
}

/// Audit category of a mid-episode input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputClass {
    Empty,
    Lure,
    Clue,
    Trap,
}

impl InputClass {
    pub const ALL: [InputClass; 4] = [InputClass::Empty, InputClass::Lure, InputClass::Clue, InputClass::Trap];

    pub fn name(self) -> &'static str {
        match self {
            InputClass::Empty => "empty",
            InputClass::Lure => "lure",
            InputClass::Clue => "clue",
            InputClass::Trap => "trap",
        }
    }
}

impl fmt::Display for InputClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sign values used when enumerating inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlyphValues {
    pub clue: Glyph,
    pub lure: Glyph,
    pub trap: Glyph,
}

impl Default for GlyphValues {
    fn default() -> Self {
        GlyphValues {
            clue: Glyph::CLUE,
            lure: Glyph::LURE,
            trap: Glyph::TRAP,
        }
    }
}

impl GlyphValues {
    pub fn glyph(&self, kind: SignKind) -> Glyph {
        match kind {
            SignKind::Clue => self.clue,
            SignKind::Lure => self.lure,
            SignKind::Trap => self.trap,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditInput {
    pub observation: Observation,
    pub class: InputClass,
    pub correct: DirectionSet,
}

fn build_observation(walls: DirectionSet, origin: Direction, sign: Option<(Direction, Glyph)>) -> Observation {
    let mut out = [0.0f32; 8];
    for d in walls.iter() {
        out[d.index()] = WALL_VALUE;
    }
    out[origin.index()] = ORIGIN_VALUE;
    if let Some((d, g)) = sign {
        out[4 + d.index()] = g.value();
    }
    Observation(out)
}

/// Every mid-episode input an agent can meet in a corridor (two exits, one
/// being the origin) or an intersection (three or more), with the set of
/// correct actions:
///
/// - empty or lure corridor: the single open non-origin direction;
/// - clue: the sign's direction;
/// - trap: any open direction that is neither the origin nor the sign's.
///
/// Lures point at a wall or at the origin. Dead ends and start percepts are
/// not part of any class.
pub fn enumerate_discrete_inputs_with(values: GlyphValues) -> Vec<AuditInput> {
    let mut out = Vec::new();
    for mask in 0u8..16 {
        let walls = DirectionSet::from_mask(mask);
        let open = walls.complement();
        if open.len() < 2 {
            continue;
        }
        for origin in open.iter() {
            let exits = open.without(origin);
            if open.len() == 2 {
                out.push(AuditInput {
                    observation: build_observation(walls, origin, None),
                    class: InputClass::Empty,
                    correct: exits,
                });
                for d in walls.with(origin).iter() {
                    out.push(AuditInput {
                        observation: build_observation(walls, origin, Some((d, values.lure))),
                        class: InputClass::Lure,
                        correct: exits,
                    });
                }
            } else {
                for d in exits.iter() {
                    out.push(AuditInput {
                        observation: build_observation(walls, origin, Some((d, values.clue))),
                        class: InputClass::Clue,
                        correct: DirectionSet::EMPTY.with(d),
                    });
                }
                for d in exits.iter() {
                    out.push(AuditInput {
                        observation: build_observation(walls, origin, Some((d, values.trap))),
                        class: InputClass::Trap,
                        correct: exits.without(d),
                    });
                }
            }
        }
    }
    out
}

pub fn enumerate_discrete_inputs() -> Vec<AuditInput> {
    enumerate_discrete_inputs_with(GlyphValues::default())
}

/// CSV with columns `w_e,w_n,w_w,w_s,s_e,s_n,s_w,s_s,class,correct_mask`;
/// the mask uses bit 0 = E, 1 = N, 2 = W, 3 = S.
pub fn inputs_to_csv(inputs: &[AuditInput]) -> String {
    let mut out = String::from("w_e,w_n,w_w,w_s,s_e,s_n,s_w,s_s,class,correct_mask\n");
    for input in inputs {
        for v in input.observation.0 {
            out.push_str(&v.to_string());
            out.push(',');
        }
        out.push_str(&format!("{},{}\n", input.class, input.correct.mask()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::MazeSpec;
    use std::collections::HashSet;

    #[test]
    fn start_and_clue_figure_examples() {
        // Start: walls E, W, S; nothing else.
        let obs = build_observation(
            DirectionSet::from_mask(0b1101),
            Direction::North,
            None,
        );
        // build_observation always marks an origin; clear it for the start case.
        let mut start = obs;
        start.0[Direction::North.index()] = 0.0;
        assert_eq!(start.0, [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);

        let clue = build_observation(
            DirectionSet::EMPTY.with(Direction::West),
            Direction::East,
            Some((Direction::North, Glyph::CLUE)),
        );
        assert_eq!(clue.0, [0.5, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn observation_at_start_has_no_origin() {
        for seed in 0..10 {
            let m = Maze::generate(&MazeSpec::new(6, 6, seed)).unwrap();
            let o = observe_discrete(&m, m.start(), None);
            assert!(o.origin().is_none());
            assert_eq!(o.walls(), m.wall_set(m.start()));
        }
    }

    #[test]
    fn enumeration_counts() {
        let inputs = enumerate_discrete_inputs();
        let count = |c| inputs.iter().filter(|i| i.class == c).count();
        assert_eq!(count(InputClass::Empty), 12);
        assert_eq!(count(InputClass::Lure), 36);
        assert_eq!(count(InputClass::Clue), 36);
        assert_eq!(count(InputClass::Trap), 36);
        let unique: HashSet<_> = inputs.iter().map(|i| i.observation).collect();
        assert_eq!(unique.len(), inputs.len());
    }

    #[test]
    fn empty_corridor_example() {
        let inputs = enumerate_discrete_inputs();
        // Open E (origin) and N: walls W and S.
        let target = build_observation(
            DirectionSet::EMPTY.with(Direction::West).with(Direction::South),
            Direction::East,
            None,
        );
        let found = inputs.iter().find(|i| i.observation == target).unwrap();
        assert_eq!(found.class, InputClass::Empty);
        assert_eq!(found.correct, DirectionSet::EMPTY.with(Direction::North));
    }

    #[test]
    fn rejects_small_resolution() {
        let m = Maze::generate(&MazeSpec::new(3, 3, 0)).unwrap();
        assert_eq!(render_cell(&m, m.start(), None, 7), Err(ObserveError::Resolution(7)));
        assert!(render_cell(&m, Cell::new(5, 0), None, 8).is_err());
    }

    #[test]
    fn closed_cell_is_four_bands() {
        // A unicursive maze walls off side branches; find a fully closed cell.
        let m = (0..50)
            .map(|s| Maze::generate(&MazeSpec::new(6, 6, s).unicursive()).unwrap())
            .find(|m| {
                (0..36).any(|i| m.wall_set(Cell::new(i % 6, i / 6)) == DirectionSet::FULL)
            })
            .expect("some unicursive maze has an isolated cell");
        let cell = (0..36)
            .map(|i| Cell::new(i % 6, i / 6))
            .find(|&c| m.wall_set(c) == DirectionSet::FULL && m.sign(c).is_none())
            .unwrap();
        let r = render_cell(&m, cell, None, 16).unwrap();
        let band = band_width(16);
        for row in 0..16 {
            for col in 0..16 {
                let border = row < band || col < band || row >= 16 - band || col >= 16 - band;
                assert_eq!(r.get(row, col), if border { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(r, render_cell(&m, cell, None, 16).unwrap());
    }

    #[test]
    fn pgm_header() {
        let m = Maze::generate(&MazeSpec::new(3, 3, 0)).unwrap();
        let pgm = render_cell(&m, m.start(), None, 8).unwrap().to_pgm();
        assert!(pgm.starts_with(b"P5\n8 8\n255\n"));
        assert_eq!(pgm.len(), 11 + 64);
    }
}
