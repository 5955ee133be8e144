//! Maze realization from a [`MazeSpec`].
//!
//! Generation consumes the spec's PCG32 stream (seeded with `spec.seed` on
//! [`MAZE_STREAM`]) in this fixed order:
//!
//! 1. Depth-first carving from the start cell. Each cell pushed on the stack
//!    gets its own copy of `[E, N, W, S]` shuffled with Fisher-Yates (three
//!    bounded draws); the cell then tries those directions in order.
//! 2. Sign placement, walking the optimal path from the start up to (not
//!    including) the goal. Every cell draws one `unit()`:
//!    - at an intersection (two or more exits besides the origin) a value
//!      below `p_trap` makes a trap: one draw picks the trap glyph, one picks
//!      the direction among open off-path exits. Otherwise a clue: one draw
//!      picks the glyph and the sign points along the path.
//!    - elsewhere a value below `p_lure` makes a lure: one draw picks the
//!      glyph, one picks the direction among walls and the origin.
//!
//! Unicursive blocking happens between the two phases and draws nothing.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{MazeError, SpecError};
use crate::geometry::{Cell, Direction, DirectionSet};
use crate::rng::{Pcg32, MAZE_STREAM};
use crate::spec::{Glyph, MazeClass, MazeSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignKind {
    Clue,
    Lure,
    Trap,
}

impl SignKind {
    pub fn is_deceptive(self) -> bool {
        self != SignKind::Clue
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sign {
    pub kind: SignKind,
    pub glyph: Glyph,
    pub direction: Direction,
}

/// A realized maze. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct Maze {
    spec: MazeSpec,
    rotation: u8,
    width: u32,
    height: u32,
    walls: Vec<DirectionSet>,
    start: Cell,
    goal: Cell,
    signs: Vec<Option<Sign>>,
    path: Vec<Cell>,
}

impl Maze {
    pub fn generate(spec: &MazeSpec) -> Result<Maze, SpecError> {
        spec.validate()?;
        let (w, h) = (spec.width, spec.height);
        let mut rng = Pcg32::new(spec.seed, MAZE_STREAM);
        let start = spec.start_corner.cell(w, h);
        let goal = spec.start_corner.opposite().cell(w, h);

        let mut maze = Maze {
            spec: spec.clone(),
            rotation: 0,
            width: w,
            height: h,
            walls: vec![DirectionSet::FULL; (w * h) as usize],
            start,
            goal,
            signs: vec![None; (w * h) as usize],
            path: Vec::new(),
        };
        maze.carve(&mut rng);
        maze.path = maze.solve().expect("a spanning tree connects start and goal");
        if spec.unicursive {
            maze.block_side_branches();
        }
        maze.place_signs(&mut rng);
        Ok(maze)
    }

    fn carve(&mut self, rng: &mut Pcg32) {
        let shuffled = |rng: &mut Pcg32| {
            let mut dirs = Direction::ALL;
            rng.shuffle(&mut dirs);
            dirs
        };
        let mut visited = vec![false; self.walls.len()];
        visited[self.index(self.start)] = true;
        let mut stack = vec![(self.start, shuffled(rng), 0usize)];
        while let Some((cell, dirs, next)) = stack.last_mut() {
            if *next == 4 {
                stack.pop();
                continue;
            }
            let (cell, dir) = (*cell, dirs[*next]);
            *next += 1;
            if let Some(n) = self.neighbor(cell, dir) {
                let ni = self.index(n);
                if !visited[ni] {
                    visited[ni] = true;
                    self.open(cell, dir);
                    stack.push((n, shuffled(rng), 0));
                }
            }
        }
    }

    fn open(&mut self, cell: Cell, dir: Direction) {
        let n = self.neighbor(cell, dir).expect("opening toward the border");
        let (ci, ni) = (self.index(cell), self.index(n));
        self.walls[ci] = self.walls[ci].without(dir);
        self.walls[ni] = self.walls[ni].without(dir.opposite());
    }

    fn close(&mut self, cell: Cell, dir: Direction) {
        let ci = self.index(cell);
        self.walls[ci] = self.walls[ci].with(dir);
        if let Some(n) = self.neighbor(cell, dir) {
            let ni = self.index(n);
            self.walls[ni] = self.walls[ni].with(dir.opposite());
        }
    }

    fn block_side_branches(&mut self) {
        for i in 0..self.path.len() {
            let cell = self.path[i];
            let keep: DirectionSet = [i.checked_sub(1), Some(i + 1)]
                .into_iter()
                .flatten()
                .filter_map(|j| self.path.get(j))
                .filter_map(|&other| cell.direction_to(other))
                .collect();
            for d in self.open_directions(cell).iter() {
                if !keep.contains(d) {
                    self.close(cell, d);
                }
            }
        }
    }

    fn place_signs(&mut self, rng: &mut Pcg32) {
        let spec = self.spec.clone();
        for i in 0..self.path.len() - 1 {
            let cell = self.path[i];
            let origin = i.checked_sub(1).and_then(|j| cell.direction_to(self.path[j]));
            let forward = cell
                .direction_to(self.path[i + 1])
                .expect("consecutive path cells are adjacent");
            let open = self.open_directions(cell);
            let exits = origin.map_or(open, |o| open.without(o));
            let roll = rng.unit();
            let sign = if exits.len() >= 2 {
                if roll < spec.p_trap {
                    let glyph = *rng.pick(&spec.trap_glyphs);
                    let off_path: Vec<Direction> = exits.without(forward).iter().collect();
                    Sign {
                        kind: SignKind::Trap,
                        glyph,
                        direction: *rng.pick(&off_path),
                    }
                } else {
                    Sign {
                        kind: SignKind::Clue,
                        glyph: *rng.pick(&spec.clue_glyphs),
                        direction: forward,
                    }
                }
            } else if roll < spec.p_lure {
                let glyph = *rng.pick(&spec.lure_glyphs);
                let mut options = self.wall_set(cell);
                if let Some(o) = origin {
                    options = options.with(o);
                }
                let options: Vec<Direction> = options.iter().collect();
                Sign {
                    kind: SignKind::Lure,
                    glyph,
                    direction: *rng.pick(&options),
                }
            } else {
                continue;
            };
            let ci = self.index(cell);
            self.signs[ci] = Some(sign);
        }
    }

    /// Breadth-first search from start to goal through open walls. On a
    /// perfect maze this is the unique path.
    pub fn solve(&self) -> Option<Vec<Cell>> {
        let mut parent: Vec<Option<Cell>> = vec![None; self.walls.len()];
        let mut seen = vec![false; self.walls.len()];
        let mut queue = VecDeque::from([self.start]);
        seen[self.index(self.start)] = true;
        while let Some(cell) = queue.pop_front() {
            if cell == self.goal {
                let mut path = vec![cell];
                let mut cur = cell;
                while let Some(p) = parent[self.index(cur)] {
                    path.push(p);
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            for d in self.open_directions(cell).iter() {
                let n = self.neighbor(cell, d)?;
                let ni = self.index(n);
                if !seen[ni] {
                    seen[ni] = true;
                    parent[ni] = Some(cell);
                    queue.push_back(n);
                }
            }
        }
        None
    }

    /// Counter-clockwise quarter turns.
    pub fn rotate(&self, quarter_turns: u8) -> Maze {
        let k = quarter_turns % 4;
        if k == 0 {
            return self.clone();
        }
        let (w, h) = (self.width, self.height);
        let (nw, nh) = if k % 2 == 1 { (h, w) } else { (w, h) };
        let mut walls = vec![DirectionSet::FULL; self.walls.len()];
        let mut signs = vec![None; self.signs.len()];
        for y in 0..h {
            for x in 0..w {
                let c = Cell::new(x, y);
                let r = c.rotated(w, h, k);
                let ri = (r.y * nw + r.x) as usize;
                let ci = self.index(c);
                walls[ri] = self.walls[ci].rotated(k);
                signs[ri] = self.signs[ci].map(|s| Sign {
                    direction: s.direction.rotated(k),
                    ..s
                });
            }
        }
        Maze {
            spec: self.spec.clone(),
            rotation: (self.rotation + k) % 4,
            width: nw,
            height: nh,
            walls,
            start: self.start.rotated(w, h, k),
            goal: self.goal.rotated(w, h, k),
            signs,
            path: self.path.iter().map(|c| c.rotated(w, h, k)).collect(),
        }
    }

    pub fn rotations(&self) -> [Maze; 4] {
        [self.clone(), self.rotate(1), self.rotate(2), self.rotate(3)]
    }

    pub fn spec(&self) -> &MazeSpec {
        &self.spec
    }

    pub fn class(&self) -> MazeClass {
        self.spec.class()
    }

    pub fn descriptor(&self) -> String {
        self.spec.descriptor()
    }

    /// Quarter turns applied since generation.
    pub fn rotation(&self) -> u8 {
        self.rotation
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn optimal_path(&self) -> &[Cell] {
        &self.path
    }

    /// Number of cells on the optimal path.
    pub fn path_len(&self) -> usize {
        self.path.len()
    }

    #[inline]
    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        (c.y * self.width + c.x) as usize
    }

    #[inline]
    pub fn neighbor(&self, c: Cell, d: Direction) -> Option<Cell> {
        let (dx, dy) = d.delta();
        let x = i64::from(c.x) + dx;
        let y = i64::from(c.y) + dy;
        (x >= 0 && y >= 0 && x < i64::from(self.width) && y < i64::from(self.height))
            .then(|| Cell::new(x as u32, y as u32))
    }

    #[inline]
    pub fn wall_set(&self, c: Cell) -> DirectionSet {
        self.walls[self.index(c)]
    }

    #[inline]
    pub fn has_wall(&self, c: Cell, d: Direction) -> bool {
        self.wall_set(c).contains(d)
    }

    #[inline]
    pub fn open_directions(&self, c: Cell) -> DirectionSet {
        self.wall_set(c).complement()
    }

    #[inline]
    pub fn sign(&self, c: Cell) -> Option<Sign> {
        self.signs[self.index(c)]
    }

    /// All signs in row-major order.
    pub fn signs(&self) -> impl Iterator<Item = (Cell, Sign)> + '_ {
        self.signs.iter().enumerate().filter_map(move |(i, s)| {
            s.map(|s| (Cell::new(i as u32 % self.width, i as u32 / self.width), s))
        })
    }

    pub fn count_signs(&self, kind: SignKind) -> usize {
        self.signs.iter().flatten().filter(|s| s.kind == kind).count()
    }

    /// Number of path cells (excluding the goal) offering two or more exits
    /// besides the one the agent arrived from.
    pub fn intersections(&self) -> usize {
        (0..self.path.len() - 1)
            .filter(|&i| {
                let cell = self.path[i];
                let open = self.open_directions(cell);
                let exits = match i.checked_sub(1) {
                    Some(j) => open.without(cell.direction_to(self.path[j]).unwrap()),
                    None => open,
                };
                exits.len() >= 2
            })
            .count()
    }

    /// Returns a copy with every lure and trap removed.
    pub fn without_deceptive_signs(&self) -> Maze {
        let mut m = self.clone();
        for s in m.signs.iter_mut() {
            if s.is_some_and(|s| s.kind.is_deceptive()) {
                *s = None;
            }
        }
        m
    }

    pub fn to_document(&self) -> MazeDocument {
        MazeDocument {
            descriptor: self.descriptor(),
            rotation: self.rotation,
            width: self.width,
            height: self.height,
            walls: self.walls.iter().map(|w| w.mask()).collect(),
            start: self.start,
            goal: self.goal,
            signs: self
                .signs()
                .map(|(cell, s)| SignEntry {
                    cell,
                    kind: s.kind,
                    glyph: s.glyph,
                    direction: s.direction,
                })
                .collect(),
            optimal_path: self.path.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("maze documents serialize")
    }

    pub fn from_json(text: &str) -> Result<Maze, MazeError> {
        let doc: MazeDocument =
            serde_json::from_str(text).map_err(|e| MazeError::Inconsistent(e.to_string()))?;
        Maze::try_from(doc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignEntry {
    pub cell: Cell,
    pub kind: SignKind,
    pub glyph: Glyph,
    pub direction: Direction,
}

/// JSON form of a maze. Walls are row-major (`y * width + x`, `y = 0` is the
/// south row) 4-bit masks with bit 0 = E, 1 = N, 2 = W, 3 = S.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MazeDocument {
    pub descriptor: String,
    pub rotation: u8,
    pub width: u32,
    pub height: u32,
    pub walls: Vec<u8>,
    pub start: Cell,
    pub goal: Cell,
    pub signs: Vec<SignEntry>,
    pub optimal_path: Vec<Cell>,
}

impl TryFrom<MazeDocument> for Maze {
    type Error = MazeError;

    /// Rebuilds the maze from its descriptor and checks that the document
    /// matches it exactly.
    fn try_from(doc: MazeDocument) -> Result<Self, Self::Error> {
        let spec = MazeSpec::from_descriptor(&doc.descriptor)?;
        let maze = Maze::generate(&spec)?.rotate(doc.rotation);
        if maze.to_document() != doc {
            return Err(MazeError::Inconsistent(format!(
                "document does not match the maze generated from {}",
                doc.descriptor
            )));
        }
        Ok(maze)
    }
}
