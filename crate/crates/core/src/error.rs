use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("{axis} must be between 2 and {max} cells, got {value}", max = crate::spec::MAX_SIDE)]
    Dimension { axis: &'static str, value: u32 },
    #[error("{field} must lie in [0, 1], got {value}")]
    Probability { field: &'static str, value: f64 },
    #[error("{kind} probability is positive but no {kind} glyphs are configured")]
    MissingGlyphs { kind: &'static str },
    #[error("at least one clue glyph is required")]
    NoClueGlyphs,
    #[error("glyph value must lie in (0, 1], got {0}")]
    Glyph(f32),
    #[error("unicursive mazes cannot carry lures or traps")]
    UnicursiveSigns,
}

impl SpecError {
    /// Name of the offending spec field.
    pub fn field(&self) -> &'static str {
        match self {
            SpecError::Dimension { axis, .. } => axis,
            SpecError::Probability { field, .. } => field,
            SpecError::MissingGlyphs { kind: "lure" } => "lure_glyphs",
            SpecError::MissingGlyphs { .. } => "trap_glyphs",
            SpecError::NoClueGlyphs => "clue_glyphs",
            SpecError::Glyph(_) => "glyph",
            SpecError::UnicursiveSigns => "unicursive",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid descriptor field `{field}`: {message}")]
pub struct DescriptorError {
    pub field: String,
    pub message: String,
}

impl DescriptorError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        DescriptorError {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<SpecError> for DescriptorError {
    fn from(e: SpecError) -> Self {
        DescriptorError::new(e.field(), e.to_string())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MazeError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error("inconsistent maze document: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ObserveError {
    #[error("raster resolution must be at least 8, got {0}")]
    Resolution(u32),
    #[error("cell ({x}, {y}) lies outside the maze")]
    OutOfBounds { x: u32, y: u32 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("the episode is over; call reset first")]
    EpisodeFinished,
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot does not start with the AMZQ1 header")]
    BadMagic,
    #[error("snapshot is truncated")]
    Truncated,
    #[error("snapshot contains {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("snapshot holds a non-finite action value")]
    NonFinite,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("decision rejected: {0}")]
    Decision(String),
    #[error("decision source unavailable: {0}")]
    SourceUnavailable(String),
    #[error("no decision is pending")]
    NoPendingDecision,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
