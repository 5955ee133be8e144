use std::fs;
use std::hash::{BuildHasher, Hasher};
use std::path::{Path, PathBuf};

use amaze_core::complexity::{report, sweep, sweep_to_csv};
use amaze_core::env::{bench_stepping, LocalRulePolicy, PathFollower, Policy, RandomPolicy};
use amaze_core::evaluate::{build_generalization_suite, evaluate_navigation, input_audit, suite_to_csv};
use amaze_core::observe::{enumerate_discrete_inputs, inputs_to_csv, render_cell};
use amaze_core::render::{box_plot, maze_svg, scatter_with_marginals, Series};
use amaze_core::trainer::{
    edhucat_run, interpolate_specs, train_direct, train_interpolation, Clock, EdhucatConfig, GreedyPolicy,
    Learner, LogicalClock, ScriptedDecisions, SystemClock, TabularQ, TrainConfig, TrainingRun, SNAPSHOT_FILE,
};
use amaze_core::{Cell, Maze, MazeSpec};
use anyhow::{bail, Context, Result};

use crate::{
    BenchArgs, ClockArg, Cli, Command, EvalArgs, GenerateArgs, MazeArgs, MetricsArgs, PlotArgs, PlotMetric,
    PolicyArg, RegimeArg, SeedArgs, ServeArgs, TrainArgs, UsageError,
};

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

pub fn run(cli: Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads as usize)
        .build_global()
        .context("configuring the worker pool")?;
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Metrics(a) => metrics(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Serve(a) => serve(a, cli.threads),
        Command::Plot(a) => plot(a),
    }
}

impl SeedArgs {
    fn resolve(&self) -> u64 {
        if !self.entropy {
            return self.seed;
        }
        let mut h = std::collections::hash_map::RandomState::new().build_hasher();
        h.write_u128(
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_nanos()),
        );
        let seed = h.finish();
        eprintln!("seed: {seed}");
        seed
    }
}

impl MazeArgs {
    fn spec(&self) -> Result<MazeSpec> {
        let spec = match &self.descriptor {
            Some(spec) => spec.clone(),
            None => {
                let mut base = MazeSpec::new(self.width, self.height, self.seed.resolve());
                base.start_corner = self.corner.corner();
                self.class.class().apply(&base)
            }
        };
        spec.validate().map_err(|e| usage(format!("{}: {e}", e.field())))?;
        Ok(spec)
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Whole-maze raster: every cell drawn without an origin marker, north up.
fn maze_pgm(maze: &Maze, resolution: u32) -> Result<Vec<u8>> {
    let (w, h, r) = (maze.width(), maze.height(), resolution);
    let mut pixels = vec![0u8; (w * r * h * r) as usize];
    for y in 0..h {
        for x in 0..w {
            let cell = render_cell(maze, Cell::new(x, y), None, r)?;
            let top = (h - 1 - y) * r;
            for row in 0..r {
                for col in 0..r {
                    let v = (cell.get(row, col).clamp(0.0, 1.0) * 255.0).round() as u8;
                    pixels[((top + row) * w * r + x * r + col) as usize] = v;
                }
            }
        }
    }
    let mut out = format!("P5\n{} {}\n255\n", w * r, h * r).into_bytes();
    out.extend(pixels);
    Ok(out)
}

fn generate(a: GenerateArgs) -> Result<()> {
    let spec = a.maze.spec()?;
    let maze = Maze::generate(&spec)?;
    let name = maze.descriptor();
    let json = a.out.join(format!("{name}.json"));
    write(&json, maze.to_json())?;
    write(&a.out.join(format!("{name}.svg")), maze_svg(&maze, None))?;
    write(&a.out.join(format!("{name}.pgm")), maze_pgm(&maze, a.resolution)?)?;
    println!("{name}");
    println!("path length {}, intersections {}", maze.path_len(), maze.intersections());
    println!("wrote {}", json.display());
    Ok(())
}

fn metrics(a: MetricsArgs) -> Result<()> {
    if !a.sweep {
        let maze = Maze::generate(&a.maze.spec()?)?;
        let text = serde_json::to_string_pretty(&report(&maze))? + "\n";
        match &a.out {
            Some(dir) => write(&dir.join(format!("{}.metrics.json", maze.descriptor())), text)?,
            None => print!("{text}"),
        }
        return Ok(());
    }
    if a.maze.descriptor.is_some() {
        return Err(usage("a sweep is built from the spec flags, not a descriptor"));
    }
    if a.count == 0 {
        return Err(usage("count: at least one maze per class is required"));
    }
    let out = a.out.clone().ok_or_else(|| usage("out: a sweep needs an output directory"))?;
    let template = a.maze.spec()?;
    let classes: Vec<_> = a.classes.iter().map(|c| c.class()).collect();
    let rows = sweep(&template, &classes, a.count);
    write(&out.join("sweep.csv"), sweep_to_csv(&rows))?;
    let points: Vec<(String, Vec<(f64, f64)>)> = classes
        .iter()
        .map(|c| {
            let pts = rows
                .iter()
                .filter(|r| r.class == *c)
                .map(|r| (r.surprisingness, r.deceptiveness))
                .collect();
            (c.name().to_string(), pts)
        })
        .collect();
    let series: Vec<Series<'_>> = points
        .iter()
        .map(|(label, pts)| Series { label, points: pts })
        .collect();
    write(&out.join("sweep.svg"), scatter_with_marginals(&series, "surprisingness", "deceptiveness"))?;
    println!("{} mazes measured; wrote {}", rows.len(), out.join("sweep.csv").display());
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    if !(a.alpha > 0.0 && a.alpha <= 1.0) {
        return Err(usage(format!("alpha: {} outside (0, 1]", a.alpha)));
    }
    if !(0.0..=1.0).contains(&a.gamma) {
        return Err(usage(format!("gamma: {} outside [0, 1]", a.gamma)));
    }
    if a.budget == 0 {
        return Err(usage("budget: must be positive"));
    }
    let config = TrainConfig {
        eval_interval: a.eval_interval,
        ..TrainConfig::default()
    };
    let seed = a.seed.resolve();
    let mut learner = TabularQ::new(a.alpha, a.gamma, 0);
    let run = match a.regime {
        RegimeArg::Direct => {
            let train = a.train.clone().ok_or_else(|| usage("train: the direct regime needs a training maze"))?;
            let eval = a.eval.clone().unwrap_or_else(|| train.clone());
            train_direct(&mut learner, &train, &eval, a.budget, &config, seed)?
        }
        RegimeArg::Interpolation => {
            let initial = a.initial.clone().ok_or_else(|| usage("initial: interpolation needs a first maze"))?;
            let last = a.train.clone().ok_or_else(|| usage("train: interpolation needs a final maze"))?;
            let eval = a.eval.clone().unwrap_or_else(|| last.clone());
            let specs = interpolate_specs(&initial, &last, a.stages).map_err(|e| usage(e.to_string()))?;
            train_interpolation(&mut learner, &specs, &eval, a.budget, &config, seed)?
        }
        RegimeArg::Steered => {
            let initial = a.initial.clone().ok_or_else(|| usage("initial: the steered regime needs a first maze"))?;
            let path = a.script.clone().ok_or_else(|| usage("script: the steered regime needs a decision script"))?;
            let edhucat = EdhucatConfig {
                k: a.k,
                stages: a.stages,
                budget: a.budget,
                initial,
                target: a.target.clone(),
                seed,
                train: config,
            };
            edhucat.validate().map_err(|e| usage(e.to_string()))?;
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let mut script = ScriptedDecisions::from_jsonl(&text).context("parsing the decision script")?;
            let clock: &dyn Clock = match a.clock {
                ClockArg::Logical => &LogicalClock,
                ClockArg::System => &SystemClock,
            };
            edhucat_run(learner.clone(), edhucat, &mut script, clock)?
        }
    };
    run.save(&a.out)?;
    print_run(&run);
    println!("wrote {}", a.out.display());
    Ok(())
}

fn print_run(run: &TrainingRun) {
    for r in &run.stages {
        let last = r.last_evaluation();
        println!(
            "stage {:>2} candidate {} {:<24} steps {:>8}/{:<8} success {:.2} return {:+.4}{}",
            r.stage,
            r.candidate,
            r.train.descriptor(),
            r.consumed,
            r.allotted,
            last.success_rate,
            last.mean_normalized_return,
            if last.optimal { " optimal" } else { "" }
        );
    }
    println!("consumed {} of {} steps; solved: {}", run.consumed(), run.budget, run.solved());
}

fn load_learner(path: &Path) -> Result<TabularQ> {
    let file: PathBuf = if path.is_dir() { path.join(SNAPSHOT_FILE) } else { path.to_path_buf() };
    let bytes = fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
    let mut learner = TabularQ::default();
    learner
        .restore(&bytes)
        .with_context(|| format!("loading {}", file.display()))?;
    Ok(learner)
}

fn eval_with<P: Policy + Clone + Send + Sync>(policy: P, a: &EvalArgs) -> Result<()> {
    let suite = build_generalization_suite(a.suite_seed, a.sample);
    let mazes = suite
        .iter()
        .map(|e| Maze::generate(&e.spec))
        .collect::<Result<Vec<_>, _>>()?;
    let nav = evaluate_navigation(&policy, &mazes);
    let audit = input_audit(&mut policy.clone());
    write(&a.out.join("suite.csv"), suite_to_csv(&suite))?;
    write(&a.out.join("navigation.csv"), nav.to_csv())?;
    write(&a.out.join("audit.csv"), audit.to_csv())?;
    write(&a.out.join("inputs.csv"), inputs_to_csv(&enumerate_discrete_inputs()))?;
    let summary = nav.summary() + &audit.summary();
    write(&a.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    if a.sample == 0 {
        return Err(usage("sample: at least one maze per column is required"));
    }
    match (a.policy, &a.snapshot) {
        (Some(PolicyArg::Oracle), _) => eval_with(PathFollower::default(), &a),
        (Some(PolicyArg::Rule), _) => eval_with(LocalRulePolicy::default(), &a),
        (Some(PolicyArg::Random), _) => eval_with(RandomPolicy::new(a.seed.resolve()), &a),
        (None, Some(path)) => {
            let learner = load_learner(path)?;
            eval_with(GreedyPolicy(&learner), &a)
        }
        (None, None) => Err(usage("a snapshot or a reference policy is required")),
    }
}

fn bench(a: BenchArgs) -> Result<()> {
    if a.steps == 0 {
        return Err(usage("steps: must be positive"));
    }
    let maze = Maze::generate(&a.descriptor)?;
    let report = bench_stepping(&maze, a.steps, a.seed.resolve());
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn serve(a: ServeArgs, threads: u32) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(threads as usize)
        .enable_all()
        .build()
        .context("starting the async runtime")?;
    runtime.block_on(amaze_service::serve(a.addr, &a.state))?;
    Ok(())
}

fn plot(a: PlotArgs) -> Result<()> {
    let mut groups = Vec::new();
    for path in &a.inputs {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
        let column = match a.metric {
            PlotMetric::NormalizedReturn => "normalized_return",
            PlotMetric::Success => "success",
        };
        let Some(index) = header.iter().position(|h| *h == column) else {
            bail!("{}: no `{column}` column", path.display());
        };
        let values = lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                let cell = l.split(',').nth(index).unwrap_or_default();
                match cell {
                    "true" => Ok(1.0),
                    "false" => Ok(0.0),
                    v => v.parse::<f64>().with_context(|| format!("{}: bad value `{v}`", path.display())),
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        groups.push((label, values));
    }
    let label = match a.metric {
        PlotMetric::NormalizedReturn => "normalized return",
        PlotMetric::Success => "success",
    };
    write(&a.out, box_plot(&groups, label))?;
    println!("wrote {}", a.out.display());
    Ok(())
}
