//! Maze recipes and their canonical string descriptor.
//!
//! Descriptor grammar (ASCII, case-sensitive):
//!
//! ```text
//! M<seed>_<W>x<H>[_S<corner>][_U][_C<glyphs>][_l<p>_L<glyphs>][_t<p>_T<glyphs>]
//! ```
//!
//! `<p>` is a decimal in `[0, 1]` whose leading zero may be dropped (`.25`),
//! `<glyphs>` is a comma-separated list of glyph values, `<corner>` is one of
//! `SW` (default, omitted when encoding), `NW`, `NE`, `SE`, and `_U` marks a
//! unicursive maze. Omitted sections take their defaults: clues `[1]`, no
//! lures, no traps. The encoder always writes `_C`, and writes a lure or trap
//! section whenever its probability is positive or its glyph list is
//! non-empty, so `decode(encode(s)) == s` for every valid spec.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DescriptorError, SpecError};
use crate::geometry::StartCorner;

/// Largest accepted side length.
pub const MAX_SIDE: u32 = 4096;

/// A sign glyph. In the discrete observation space a glyph is perceived
/// through its value, which lies in `(0, 1]`.
#[derive(Clone, Copy, Debug, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f32", into = "f32")]
pub struct Glyph(f32);

impl Glyph {
    pub const CLUE: Glyph = Glyph(1.0);
    pub const TRAP: Glyph = Glyph(0.5);
    pub const LURE: Glyph = Glyph(0.25);

    pub fn new(value: f32) -> Result<Self, SpecError> {
        if value > 0.0 && value <= 1.0 {
            Ok(Glyph(value))
        } else {
            Err(SpecError::Glyph(value))
        }
    }

    #[inline]
    pub fn value(self) -> f32 {
        self.0
    }
}

impl PartialEq for Glyph {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for Glyph {}

impl Hash for Glyph {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

impl TryFrom<f32> for Glyph {
    type Error = SpecError;

    fn try_from(v: f32) -> Result<Self, Self::Error> {
        Glyph::new(v)
    }
}

impl From<Glyph> for f32 {
    fn from(g: Glyph) -> f32 {
        g.0
    }
}

/// Difficulty class derived from a spec.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MazeClass {
    Trivial,
    Simple,
    Lures,
    Traps,
    Complex,
}

impl MazeClass {
    pub const ALL: [MazeClass; 5] = [
        MazeClass::Trivial,
        MazeClass::Simple,
        MazeClass::Lures,
        MazeClass::Traps,
        MazeClass::Complex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MazeClass::Trivial => "Trivial",
            MazeClass::Simple => "Simple",
            MazeClass::Lures => "Lures",
            MazeClass::Traps => "Traps",
            MazeClass::Complex => "Complex",
        }
    }

    /// Turns a template into a spec of this class. Probabilities and glyphs
    /// of the template are kept when the class uses them; a class that needs
    /// a sign kind the template lacks falls back to `p = 0.25` lures with the
    /// default lure glyph, or `p = 0.5` traps with the default trap glyph.
    pub fn apply(self, template: &MazeSpec) -> MazeSpec {
        let mut spec = template.clone();
        let (lures, traps) = match self {
            MazeClass::Trivial | MazeClass::Simple => (false, false),
            MazeClass::Lures => (true, false),
            MazeClass::Traps => (false, true),
            MazeClass::Complex => (true, true),
        };
        spec.unicursive = self == MazeClass::Trivial;
        if lures {
            if spec.p_lure == 0.0 {
                spec.p_lure = 0.25;
            }
            if spec.lure_glyphs.is_empty() {
                spec.lure_glyphs = vec![Glyph::LURE];
            }
        } else {
            spec.p_lure = 0.0;
            spec.lure_glyphs.clear();
        }
        if traps {
            if spec.p_trap == 0.0 {
                spec.p_trap = 0.5;
            }
            if spec.trap_glyphs.is_empty() {
                spec.trap_glyphs = vec![Glyph::TRAP];
            }
        } else {
            spec.p_trap = 0.0;
            spec.trap_glyphs.clear();
        }
        spec
    }
}

impl fmt::Display for MazeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MazeClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MazeClass::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown maze class {s:?}"))
    }
}

/// Complete generative recipe of a maze.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MazeSpec {
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    pub start_corner: StartCorner,
    pub unicursive: bool,
    pub clue_glyphs: Vec<Glyph>,
    pub lure_glyphs: Vec<Glyph>,
    pub p_lure: f64,
    pub trap_glyphs: Vec<Glyph>,
    pub p_trap: f64,
}

impl Default for MazeSpec {
    fn default() -> Self {
        MazeSpec {
            width: 5,
            height: 5,
            seed: 0,
            start_corner: StartCorner::SW,
            unicursive: false,
            clue_glyphs: vec![Glyph::CLUE],
            lure_glyphs: Vec::new(),
            p_lure: 0.0,
            trap_glyphs: Vec::new(),
            p_trap: 0.0,
        }
    }
}

impl MazeSpec {
    pub fn new(width: u32, height: u32, seed: u64) -> Self {
        MazeSpec {
            width,
            height,
            seed,
            ..MazeSpec::default()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        MazeSpec {
            seed,
            ..self.clone()
        }
    }

    pub fn unicursive(mut self) -> Self {
        self.unicursive = true;
        self
    }

    pub fn with_lures(mut self, p: f64, glyph: Glyph) -> Self {
        self.p_lure = p;
        self.lure_glyphs = vec![glyph];
        self
    }

    pub fn with_traps(mut self, p: f64, glyph: Glyph) -> Self {
        self.p_trap = p;
        self.trap_glyphs = vec![glyph];
        self
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        for (axis, value) in [("width", self.width), ("height", self.height)] {
            if !(2..=MAX_SIDE).contains(&value) {
                return Err(SpecError::Dimension { axis, value });
            }
        }
        for (field, value) in [("p_lure", self.p_lure), ("p_trap", self.p_trap)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SpecError::Probability { field, value });
            }
        }
        if self.clue_glyphs.is_empty() {
            return Err(SpecError::NoClueGlyphs);
        }
        if self.p_lure > 0.0 && self.lure_glyphs.is_empty() {
            return Err(SpecError::MissingGlyphs { kind: "lure" });
        }
        if self.p_trap > 0.0 && self.trap_glyphs.is_empty() {
            return Err(SpecError::MissingGlyphs { kind: "trap" });
        }
        if self.unicursive && (self.p_lure > 0.0 || self.p_trap > 0.0) {
            return Err(SpecError::UnicursiveSigns);
        }
        Ok(())
    }

    pub fn class(&self) -> MazeClass {
        match (self.unicursive, self.p_lure > 0.0, self.p_trap > 0.0) {
            (true, _, _) => MazeClass::Trivial,
            (false, false, false) => MazeClass::Simple,
            (false, true, false) => MazeClass::Lures,
            (false, false, true) => MazeClass::Traps,
            (false, true, true) => MazeClass::Complex,
        }
    }

    pub fn descriptor(&self) -> String {
        let mut out = format!("M{}_{}x{}", self.seed, self.width, self.height);
        if self.start_corner != StartCorner::SW {
            out.push_str("_S");
            out.push_str(self.start_corner.as_str());
        }
        if self.unicursive {
            out.push_str("_U");
        }
        out.push_str("_C");
        out.push_str(&format_glyphs(&self.clue_glyphs));
        if self.p_lure > 0.0 || !self.lure_glyphs.is_empty() {
            out.push_str(&format!("_l{}_L{}", format_decimal(self.p_lure), format_glyphs(&self.lure_glyphs)));
        }
        if self.p_trap > 0.0 || !self.trap_glyphs.is_empty() {
            out.push_str(&format!("_t{}_T{}", format_decimal(self.p_trap), format_glyphs(&self.trap_glyphs)));
        }
        out
    }

    /// Parses a descriptor. The result is validated.
    pub fn from_descriptor(text: &str) -> Result<Self, DescriptorError> {
        let spec = parse_descriptor(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for MazeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.descriptor())
    }
}

impl FromStr for MazeSpec {
    type Err = DescriptorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MazeSpec::from_descriptor(s)
    }
}

impl TryFrom<String> for MazeSpec {
    type Error = DescriptorError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        MazeSpec::from_descriptor(&s)
    }
}

impl From<MazeSpec> for String {
    fn from(s: MazeSpec) -> String {
        s.descriptor()
    }
}

pub(crate) fn format_decimal<T: fmt::Display>(v: T) -> String {
    let s = v.to_string();
    match s.strip_prefix("0.") {
        Some(rest) => format!(".{rest}"),
        None => s,
    }
}

fn format_glyphs(glyphs: &[Glyph]) -> String {
    glyphs
        .iter()
        .map(|g| format_decimal(g.value()))
        .collect::<Vec<_>>()
        .join(",")
}

fn is_decimal(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_ascii_digit() || c == '.')
        && s.chars().filter(|&c| c == '.').count() <= 1
        && s.chars().any(|c| c.is_ascii_digit())
}

fn parse_probability(field: &str, s: &str) -> Result<f64, DescriptorError> {
    if !is_decimal(s) {
        return Err(DescriptorError::new(field, format!("{s:?} is not a decimal")));
    }
    let v: f64 = s
        .parse()
        .map_err(|_| DescriptorError::new(field, format!("{s:?} is not a decimal")))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(DescriptorError::new(field, format!("{v} is outside [0, 1]")));
    }
    Ok(v)
}

fn parse_glyphs(field: &str, s: &str) -> Result<Vec<Glyph>, DescriptorError> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|part| {
            if !is_decimal(part) {
                return Err(DescriptorError::new(field, format!("{part:?} is not a glyph value")));
            }
            let v: f32 = part
                .parse()
                .map_err(|_| DescriptorError::new(field, format!("{part:?} is not a glyph value")))?;
            Glyph::new(v).map_err(|e| DescriptorError::new(field, e.to_string()))
        })
        .collect()
}

fn parse_descriptor(text: &str) -> Result<MazeSpec, DescriptorError> {
    let mut tokens = text.split('_');
    let mut spec = MazeSpec::default();

    let seed = tokens.next().unwrap_or_default();
    let digits = seed
        .strip_prefix('M')
        .ok_or_else(|| DescriptorError::new("seed", "descriptor must start with `M<seed>`"))?;
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(DescriptorError::new("seed", format!("{digits:?} is not an unsigned integer")));
    }
    spec.seed = digits
        .parse()
        .map_err(|_| DescriptorError::new("seed", format!("{digits:?} does not fit in 64 bits")))?;

    let size = tokens
        .next()
        .ok_or_else(|| DescriptorError::new("size", "missing `<W>x<H>`"))?;
    let (w, h) = size
        .split_once('x')
        .ok_or_else(|| DescriptorError::new("size", format!("{size:?} is not `<W>x<H>`")))?;
    let parse_side = |axis: &str, v: &str| -> Result<u32, DescriptorError> {
        if v.is_empty() || !v.chars().all(|c| c.is_ascii_digit()) {
            return Err(DescriptorError::new(axis, format!("{v:?} is not an unsigned integer")));
        }
        v.parse()
            .map_err(|_| DescriptorError::new(axis, format!("{v:?} is out of range")))
    };
    spec.width = parse_side("width", w)?;
    spec.height = parse_side("height", h)?;

    // Optional sections must appear in grammar order, each at most once.
    let order = ['S', 'U', 'C', 'l', 'L', 't', 'T'];
    let mut last: Option<usize> = None;
    let mut lure_p = None;
    let mut lure_g = None;
    let mut trap_p = None;
    let mut trap_g = None;
    for token in tokens {
        let key = token
            .chars()
            .next()
            .ok_or_else(|| DescriptorError::new("section", "empty section"))?;
        let rank = order
            .iter()
            .position(|&k| k == key)
            .ok_or_else(|| DescriptorError::new("section", format!("unknown section {token:?}")))?;
        if last.is_some_and(|l| l >= rank) {
            return Err(DescriptorError::new("section", format!("section {token:?} is out of order or repeated")));
        }
        last = Some(rank);
        let body = &token[1..];
        match key {
            'S' => {
                spec.start_corner = body
                    .parse()
                    .map_err(|e: String| DescriptorError::new("start_corner", e))?
            }
            'U' => {
                if !body.is_empty() {
                    return Err(DescriptorError::new("unicursive", format!("unexpected {body:?} after `U`")));
                }
                spec.unicursive = true;
            }
            'C' => {
                spec.clue_glyphs = parse_glyphs("clue_glyphs", body)?;
                if spec.clue_glyphs.is_empty() {
                    return Err(DescriptorError::new("clue_glyphs", "at least one clue glyph is required"));
                }
            }
            'l' => lure_p = Some(parse_probability("p_lure", body)?),
            'L' => lure_g = Some(parse_glyphs("lure_glyphs", body)?),
            't' => trap_p = Some(parse_probability("p_trap", body)?),
            'T' => trap_g = Some(parse_glyphs("trap_glyphs", body)?),
            _ => unreachable!(),
        }
    }
    match (lure_p, lure_g) {
        (Some(p), Some(g)) => {
            spec.p_lure = p;
            spec.lure_glyphs = g;
        }
        (None, None) => {}
        (Some(_), None) => return Err(DescriptorError::new("lure_glyphs", "`_l<p>` must be followed by `_L<glyphs>`")),
        (None, Some(_)) => return Err(DescriptorError::new("p_lure", "`_L<glyphs>` requires a preceding `_l<p>`")),
    }
    match (trap_p, trap_g) {
        (Some(p), Some(g)) => {
            spec.p_trap = p;
            spec.trap_glyphs = g;
        }
        (None, None) => {}
        (Some(_), None) => return Err(DescriptorError::new("trap_glyphs", "`_t<p>` must be followed by `_T<glyphs>`")),
        (None, Some(_)) => return Err(DescriptorError::new("p_trap", "`_T<glyphs>` requires a preceding `_t<p>`")),
    }
    Ok(spec)
}
