mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use amaze_core::{MazeClass, MazeSpec, StartCorner};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Deterministic maze benchmark generator and training workbench.
#[derive(Debug, Parser)]
#[command(name = "amaze", version)]
pub struct Cli {
    /// Upper bound on worker threads for all internal parallelism.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=1024))]
    pub threads: u32,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Generate a maze and write its JSON document, SVG drawing and PGM raster.
    Generate(GenerateArgs),
    /// Complexity metrics of one maze, or a sweep over classes and seeds.
    Metrics(MetricsArgs),
    /// Train a tabular learner under one of the three regimes.
    Train(TrainArgs),
    /// Run the navigation suite and the input audit on a policy.
    Eval(EvalArgs),
    /// Measure environment stepping throughput with a random policy.
    Bench(BenchArgs),
    /// Serve the steering session API.
    Serve(ServeArgs),
    /// Draw box plots from navigation CSV files.
    Plot(PlotArgs),
}

/// A maze given either as a descriptor or through individual spec flags.
#[derive(Debug, Args)]
pub struct MazeArgs {
    /// Maze descriptor such as M7_5x5_C1; overrides the spec flags.
    #[arg(value_parser = parse_spec)]
    pub descriptor: Option<MazeSpec>,
    /// Maze class applied to the spec flags.
    #[arg(long, value_enum, default_value_t = ClassArg::Simple)]
    pub class: ClassArg,
    #[arg(long, default_value_t = 10)]
    pub width: u32,
    #[arg(long, default_value_t = 10)]
    pub height: u32,
    #[arg(long, value_enum, default_value_t = CornerArg::Sw)]
    pub corner: CornerArg,
    #[command(flatten)]
    pub seed: SeedArgs,
}

#[derive(Debug, Args)]
pub struct SeedArgs {
    /// Seed; defaults to 0 so runs are reproducible.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Draw the seed from the operating system instead (printed to stderr).
    #[arg(long, conflicts_with = "seed")]
    pub entropy: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub maze: MazeArgs,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Pixels per cell side in the PGM raster.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(8..=256))]
    pub resolution: u32,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub maze: MazeArgs,
    /// Sweep every requested class over consecutive seeds instead.
    #[arg(long)]
    pub sweep: bool,
    /// Mazes per class in a sweep.
    #[arg(long, default_value_t = 1000, requires = "sweep")]
    pub count: usize,
    /// Classes included in a sweep.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = ClassArg::all(), requires = "sweep")]
    pub classes: Vec<ClassArg>,
    /// Output directory; single reports go to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub regime: RegimeArg,
    /// Training maze (direct) or final stage maze (interpolation).
    #[arg(long, value_parser = parse_spec)]
    pub train: Option<MazeSpec>,
    /// Evaluation maze; defaults to the training or final maze.
    #[arg(long, value_parser = parse_spec)]
    pub eval: Option<MazeSpec>,
    /// First stage maze (interpolation, steered).
    #[arg(long, value_parser = parse_spec)]
    pub initial: Option<MazeSpec>,
    /// Additional evaluation maze for steered candidates.
    #[arg(long, value_parser = parse_spec)]
    pub target: Option<MazeSpec>,
    /// Total environment steps.
    #[arg(long, default_value_t = 3_000_000)]
    pub budget: u64,
    #[arg(long, default_value_t = 10)]
    pub stages: usize,
    /// Candidates per steered stage.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Decision script for the steered regime, one JSON decision per line.
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long, default_value_t = amaze_core::trainer::tabular::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = amaze_core::trainer::tabular::DEFAULT_GAMMA)]
    pub gamma: f64,
    /// Steps between greedy evaluations.
    #[arg(long, default_value_t = 10_000)]
    pub eval_interval: u64,
    /// Timestamps in the decision log.
    #[arg(long, value_enum, default_value_t = ClockArg::Logical)]
    pub clock: ClockArg,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// Run directory to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Learner snapshot, or a training run directory holding one.
    #[arg(long, required_unless_present = "policy")]
    pub snapshot: Option<PathBuf>,
    /// Built-in reference policy instead of a snapshot.
    #[arg(long, value_enum, conflicts_with = "snapshot")]
    pub policy: Option<PolicyArg>,
    /// First seed of the suite sampling.
    #[arg(long, default_value_t = 0)]
    pub suite_seed: u64,
    /// Mazes sampled per suite column.
    #[arg(long, default_value_t = amaze_core::evaluate::DEFAULT_SUITE_SAMPLE)]
    pub sample: usize,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// Directory for the suite, navigation, audit and summary files.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(value_parser = parse_spec, default_value = "M0_20x20_C1")]
    pub descriptor: MazeSpec,
    /// Steps to take.
    #[arg(long, default_value_t = 1_000_000)]
    pub steps: u64,
    #[command(flatten)]
    pub seed: SeedArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address.
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: std::net::SocketAddr,
    /// Directory holding session state; sessions found there are resumed.
    #[arg(long, default_value = "amaze-sessions")]
    pub state: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Navigation CSV files; each becomes one box labelled by its file stem.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = PlotMetric::NormalizedReturn)]
    pub metric: PlotMetric,
    /// SVG file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClassArg {
    Trivial,
    Simple,
    Lures,
    Traps,
    Complex,
}

impl ClassArg {
    fn all() -> Vec<ClassArg> {
        vec![ClassArg::Trivial, ClassArg::Simple, ClassArg::Lures, ClassArg::Traps, ClassArg::Complex]
    }

    pub fn class(self) -> MazeClass {
        match self {
            ClassArg::Trivial => MazeClass::Trivial,
            ClassArg::Simple => MazeClass::Simple,
            ClassArg::Lures => MazeClass::Lures,
            ClassArg::Traps => MazeClass::Traps,
            ClassArg::Complex => MazeClass::Complex,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CornerArg {
    Sw,
    Nw,
    Ne,
    Se,
}

impl CornerArg {
    pub fn corner(self) -> StartCorner {
        match self {
            CornerArg::Sw => StartCorner::SW,
            CornerArg::Nw => StartCorner::NW,
            CornerArg::Ne => StartCorner::NE,
            CornerArg::Se => StartCorner::SE,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Direct,
    Interpolation,
    #[value(alias = "edhucat")]
    Steered,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClockArg {
    Logical,
    System,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    /// Follows the optimal path of each maze.
    Oracle,
    /// Local clue-following rule.
    Rule,
    /// Uniformly random actions.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlotMetric {
    NormalizedReturn,
    Success,
}

fn parse_spec(text: &str) -> Result<MazeSpec, String> {
    MazeSpec::from_descriptor(text).map_err(|e| e.to_string())
}

/// Validation failure detected before any work starts.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
