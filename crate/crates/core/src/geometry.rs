//! Grid primitives. `x` grows eastward, `y` grows northward, `(0, 0)` is the
//! south-west corner.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Cardinal direction, in observation channel order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "E")]
    East = 0,
    #[serde(rename = "N")]
    North = 1,
    #[serde(rename = "W")]
    West = 2,
    #[serde(rename = "S")]
    South = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::East,
        Direction::North,
        Direction::West,
        Direction::South,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Direction {
        Self::ALL[i % 4]
    }

    #[inline]
    pub fn bit(self) -> u8 {
        1 << (self as u8)
    }

    #[inline]
    pub fn opposite(self) -> Direction {
        Self::from_index(self.index() + 2)
    }

    /// Counter-clockwise quarter turns.
    #[inline]
    pub fn rotated(self, quarter_turns: u8) -> Direction {
        Self::from_index(self.index() + quarter_turns as usize)
    }

    pub fn delta(self) -> (i64, i64) {
        match self {
            Direction::East => (1, 0),
            Direction::North => (0, 1),
            Direction::West => (-1, 0),
            Direction::South => (0, -1),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Direction::East => 'E',
            Direction::North => 'N',
            Direction::West => 'W',
            Direction::South => 'S',
        }
    }

    pub fn from_letter(c: char) -> Option<Direction> {
        match c.to_ascii_uppercase() {
            'E' => Some(Direction::East),
            'N' => Some(Direction::North),
            'W' => Some(Direction::West),
            'S' => Some(Direction::South),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Small set of directions stored as a 4-bit mask (bit `d` for direction `d`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DirectionSet(u8);

impl DirectionSet {
    pub const EMPTY: DirectionSet = DirectionSet(0);
    pub const FULL: DirectionSet = DirectionSet(0b1111);

    pub fn from_mask(mask: u8) -> Self {
        DirectionSet(mask & 0b1111)
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn contains(self, d: Direction) -> bool {
        self.0 & d.bit() != 0
    }

    pub fn with(self, d: Direction) -> Self {
        DirectionSet(self.0 | d.bit())
    }

    pub fn without(self, d: Direction) -> Self {
        DirectionSet(self.0 & !d.bit())
    }

    pub fn complement(self) -> Self {
        DirectionSet(!self.0 & 0b1111)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Direction> {
        Direction::ALL.into_iter().filter(move |d| self.contains(*d))
    }

    pub fn rotated(self, quarter_turns: u8) -> Self {
        self.iter()
            .fold(DirectionSet::EMPTY, |s, d| s.with(d.rotated(quarter_turns)))
    }
}

impl FromIterator<Direction> for DirectionSet {
    fn from_iter<I: IntoIterator<Item = Direction>>(iter: I) -> Self {
        iter.into_iter().fold(DirectionSet::EMPTY, DirectionSet::with)
    }
}

impl fmt::Display for DirectionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in self.iter() {
            write!(f, "{}", d.letter())?;
        }
        Ok(())
    }
}

/// Cell coordinate; serialized as `[x, y]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(u32, u32)", into = "(u32, u32)")]
pub struct Cell {
    pub x: u32,
    pub y: u32,
}

impl Cell {
    pub const fn new(x: u32, y: u32) -> Self {
        Cell { x, y }
    }

    /// Direction from `self` to an adjacent `other`, if they are 4-neighbors.
    pub fn direction_to(self, other: Cell) -> Option<Direction> {
        let dx = i64::from(other.x) - i64::from(self.x);
        let dy = i64::from(other.y) - i64::from(self.y);
        Direction::ALL.into_iter().find(|d| d.delta() == (dx, dy))
    }

    /// Maps this cell through `quarter_turns` counter-clockwise rotations of a
    /// `width` x `height` grid.
    pub fn rotated(self, width: u32, height: u32, quarter_turns: u8) -> Cell {
        let (mut c, mut w, mut h) = (self, width, height);
        for _ in 0..quarter_turns % 4 {
            c = Cell::new(h - 1 - c.y, c.x);
            std::mem::swap(&mut w, &mut h);
        }
        c
    }
}

impl From<(u32, u32)> for Cell {
    fn from((x, y): (u32, u32)) -> Self {
        Cell { x, y }
    }
}

impl From<Cell> for (u32, u32) {
    fn from(c: Cell) -> Self {
        (c.x, c.y)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StartCorner {
    #[default]
    SW,
    NW,
    NE,
    SE,
}

impl StartCorner {
    pub const ALL: [StartCorner; 4] = [StartCorner::SW, StartCorner::NW, StartCorner::NE, StartCorner::SE];

    pub fn cell(self, width: u32, height: u32) -> Cell {
        match self {
            StartCorner::SW => Cell::new(0, 0),
            StartCorner::NW => Cell::new(0, height - 1),
            StartCorner::NE => Cell::new(width - 1, height - 1),
            StartCorner::SE => Cell::new(width - 1, 0),
        }
    }

    pub fn opposite(self) -> StartCorner {
        match self {
            StartCorner::SW => StartCorner::NE,
            StartCorner::NW => StartCorner::SE,
            StartCorner::NE => StartCorner::SW,
            StartCorner::SE => StartCorner::NW,
        }
    }

    /// Corner reached after `quarter_turns` counter-clockwise rotations.
    pub fn rotated(self, quarter_turns: u8) -> StartCorner {
        const CCW: [StartCorner; 4] = [StartCorner::SW, StartCorner::SE, StartCorner::NE, StartCorner::NW];
        let i = CCW.iter().position(|c| *c == self).unwrap_or(0);
        CCW[(i + quarter_turns as usize) % 4]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StartCorner::SW => "SW",
            StartCorner::NW => "NW",
            StartCorner::NE => "NE",
            StartCorner::SE => "SE",
        }
    }
}

impl FromStr for StartCorner {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SW" => Ok(StartCorner::SW),
            "NW" => Ok(StartCorner::NW),
            "NE" => Ok(StartCorner::NE),
            "SE" => Ok(StartCorner::SE),
            other => Err(format!("unknown start corner {other:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ccw_rotation_maps_east_to_north() {
        assert_eq!(Direction::East.rotated(1), Direction::North);
        assert_eq!(Direction::South.rotated(1), Direction::East);
        assert_eq!(Direction::West.rotated(4), Direction::West);
    }

    #[test]
    fn cell_rotation_agrees_with_direction_rotation() {
        // Moving east then rotating equals rotating then moving north.
        let (w, h) = (5, 3);
        let a = Cell::new(1, 2);
        let b = Cell::new(2, 2);
        let ra = a.rotated(w, h, 1);
        let rb = b.rotated(w, h, 1);
        assert_eq!(ra.direction_to(rb), Some(Direction::North));
    }

    #[test]
    fn four_turns_is_identity() {
        let c = Cell::new(3, 1);
        assert_eq!(c.rotated(7, 4, 4), c);
        assert_eq!(c.rotated(7, 4, 1).rotated(4, 7, 3), c);
    }

    #[test]
    fn corner_rotation_follows_cells() {
        let (w, h) = (6, 4);
        for corner in StartCorner::ALL {
            for k in 0..4u8 {
                let (rw, rh) = if k % 2 == 1 { (h, w) } else { (w, h) };
                assert_eq!(
                    corner.cell(w, h).rotated(w, h, k),
                    corner.rotated(k).cell(rw, rh),
                    "{corner:?} {k}"
                );
            }
        }
        assert_eq!(StartCorner::SW.rotated(1), StartCorner::SE);
    }

    #[test]
    fn direction_set_basics() {
        let s: DirectionSet = [Direction::East, Direction::South].into_iter().collect();
        assert_eq!(s.len(), 2);
        assert_eq!(s.to_string(), "ES");
        assert_eq!(s.rotated(1).to_string(), "EN");
        assert_eq!(s.complement().to_string(), "NW");
    }
}
