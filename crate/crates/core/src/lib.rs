//! Maze benchmark generation, observation encoding, rewards, complexity
//! metrics, reference training regimes and evaluation harnesses.

pub mod complexity;
pub mod env;
pub mod evaluate;
pub mod error;
pub mod geometry;
pub mod maze;
pub mod observe;
pub mod render;
pub mod rng;
pub mod spec;
pub mod stats;
pub mod trainer;

pub use env::{Env, EpisodeResult, RewardParams, RewardPreset, Step, StepEvent};
pub use error::{DescriptorError, EnvError, MazeError, ObserveError, SpecError};
pub use geometry::{Cell, Direction, DirectionSet, StartCorner};
pub use maze::{Maze, Sign, SignKind};
pub use observe::{observe_discrete, Observation};
pub use spec::{Glyph, MazeClass, MazeSpec};
