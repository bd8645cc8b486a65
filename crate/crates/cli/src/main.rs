use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use metabalance::data::Normalize;
use metabalance::experiment::{
    preset, preset_names, prepare_dataset, run_experiment, run_grid, write_curves, DataSource, ExperimentConfig, RunOptions,
    TrainerConfig,
};
use metabalance::resampling::SamplerKind;
use metabalance::trainers::Summary;
use metabalance::Error;

/// Meta-learned training for imbalanced tabular data.
///
/// Exit codes: 0 success, 1 failure or partial failure (some seeds or grid
/// cells failed), 2 configuration error.
#[derive(Parser)]
#[command(name = "metabalance", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a CSV (or synthetic source), split it and write train.csv,
    /// test.csv and a manifest with checksums.
    Prepare(PrepareArgs),
    /// Train and evaluate one model per seed.
    Run(RunArgs),
    /// Train every (inner, outer) sampler pair and write the metric matrix.
    Grid(GridArgs),
    /// Write per-class accuracy curves from a run directory.
    Curves {
        run_dir: PathBuf,
    },
    /// List built-in presets, or print one as a config file.
    Presets {
        name: Option<String>,
    },
}

#[derive(Args)]
struct Source {
    /// Experiment config file (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset name (see `metabalance presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Override the CSV path of the data source.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct Execution {
    /// Seeds, as a list `0,1,2` or a range `0..10`.
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads; 1 runs seeds sequentially. Defaults to all cores.
    #[arg(long, short = 'j')]
    jobs: Option<usize>,
    /// Output directory (default: the config's, else runs/<name>).
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    /// Drop the second-order term of the meta-gradient.
    #[arg(long)]
    first_order: bool,
}

#[derive(Args)]
struct PrepareArgs {
    #[command(flatten)]
    source: Source,
    /// CSV file to prepare (instead of --config/--preset).
    #[arg(long, conflicts_with_all = ["config", "preset"])]
    csv: Option<PathBuf>,
    #[arg(long, default_value = "Class")]
    label_column: String,
    /// Columns to ignore; repeatable.
    #[arg(long = "drop")]
    drop_columns: Vec<String>,
    #[arg(long, value_parser = ["zscore", "none"], default_value = "zscore")]
    normalize: String,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long)]
    stratified: bool,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long, short = 'o')]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    exec: Execution,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    exec: Execution,
    /// Inner sampler kinds, comma separated (default: the config's grid).
    #[arg(long, value_delimiter = ',')]
    inner: Vec<SamplerKind>,
    /// Outer sampler kinds, comma separated.
    #[arg(long, value_delimiter = ',')]
    outer: Vec<SamplerKind>,
}

enum Failure {
    Config(String),
    Run(String),
    Partial(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Failure> {
    let bad = || Failure::Config(format!("bad seed list {s:?}; use 0,1,2 or 0..10"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a >= b {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

fn load_config(src: &Source) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match (&src.config, &src.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(Failure::Config("pass --config FILE or --preset NAME".into())),
    };
    if let Some(p) = &src.data {
        match &mut cfg.data {
            DataSource::Csv { path, .. } => *path = p.clone(),
            DataSource::Synthetic { .. } => return Err(Failure::Config("--data only applies to CSV sources".into())),
        }
    }
    Ok(cfg)
}

fn apply_execution(cfg: &mut ExperimentConfig, exec: &Execution) -> Result<PathBuf, Failure> {
    if let Some(s) = &exec.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if exec.first_order {
        match &mut cfg.trainer {
            TrainerConfig::Metabalance(m) => m.first_order = true,
            TrainerConfig::Baseline(_) => log::warn!("--first-order has no effect on a baseline trainer"),
        }
    }
    if let Some(j) = exec.jobs {
        if j == 0 {
            return Err(Failure::Config("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Failure::Run(e.to_string()))?;
    }
    cfg.validate()?;
    Ok(exec
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name)))
}

fn fmt_summary(s: &Summary) -> String {
    match s.std_err {
        Some(se) => format!("{:.4} ± {:.4} (n={})", s.mean, se, s.n),
        None => format!("{:.4} (n=1, std err n/a)", s.mean),
    }
}

fn prepare(args: PrepareArgs) -> Result<(), Failure> {
    let source = match &args.csv {
        Some(csv) => DataSource::Csv {
            path: csv.clone(),
            label_column: args.label_column.clone(),
            drop_columns: args.drop_columns.clone(),
            normalize: if args.normalize == "none" { Normalize::None } else { Normalize::Zscore },
            train_fraction: args.train_fraction,
            stratified: args.stratified,
            split_seed: args.split_seed,
        },
        None => load_config(&args.source)?.data,
    };
    let manifest = prepare_dataset(&source, &args.out)?;
    println!("{}", std::fs::read_to_string(&manifest).map_err(|e| Failure::Run(e.to_string()))?);
    println!("wrote {}", manifest.display());
    Ok(())
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut cfg = load_config(&args.source)?;
    let out = apply_execution(&mut cfg, &args.exec)?;
    let manifest = run_experiment(
        &cfg,
        &RunOptions {
            output_dir: Some(out.clone()),
            parallel: args.exec.jobs != Some(1),
        },
    )?;
    println!("{} ({} seeds, {:.1}s)", manifest.name, manifest.seeds.len(), manifest.wall_time_s);
    for (k, s) in &manifest.summary {
        let mark = if *k == manifest.headline_metric { " *" } else { "" };
        println!("  {k:<36} {}{mark}", fmt_summary(s));
    }
    println!("wrote {}", out.display());
    if manifest.failed_seeds.is_empty() {
        Ok(())
    } else {
        for s in manifest.seeds.iter().filter(|s| s.error.is_some()) {
            eprintln!("seed {} failed: {}", s.seed, s.error.as_deref().unwrap_or(""));
        }
        Err(Failure::Partial(format!("{} of {} seeds failed", manifest.failed_seeds.len(), manifest.seeds.len())))
    }
}

fn grid(args: GridArgs) -> Result<(), Failure> {
    let mut cfg = load_config(&args.source)?;
    let out = apply_execution(&mut cfg, &args.exec)?;
    let spec = cfg.grid.clone();
    let inner = if args.inner.is_empty() { spec.as_ref().map(|g| g.inner.clone()) } else { Some(args.inner) };
    let outer = if args.outer.is_empty() { spec.as_ref().map(|g| g.outer.clone()) } else { Some(args.outer) };
    let (Some(inner), Some(outer)) = (inner, outer) else {
        return Err(Failure::Config("no grid kinds: pass --inner and --outer or add a [grid] table".into()));
    };
    let manifest = run_grid(&cfg, &inner, &outer, Some(&out))?;
    println!("{}", std::fs::read_to_string(out.join("grid.csv")).map_err(|e| Failure::Run(e.to_string()))?);
    if let Some((i, j)) = manifest.result.argmax() {
        println!("best cell: inner {} / outer {}", inner[i], outer[j]);
    }
    println!("wrote {}", out.display());
    if manifest.result.has_failures() {
        for c in manifest.result.cells.iter().filter(|c| !c.failures.is_empty()) {
            for (seed, msg) in &c.failures {
                eprintln!("cell ({}, {}) seed {seed} failed: {msg}", c.inner, c.outer);
            }
        }
        return Err(Failure::Partial("some grid cells failed".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prepare(a) => prepare(a),
        Command::Run(a) => run(a),
        Command::Grid(a) => grid(a),
        Command::Curves { run_dir } => write_curves(&run_dir).map_err(Failure::from).map(|files| {
            for f in files {
                println!("wrote {}", run_dir.join(f).display());
            }
        }),
        Command::Presets { name: None } => {
            for n in preset_names() {
                println!("{n}");
            }
            Ok(())
        }
        Command::Presets { name: Some(n) } => preset(&n).and_then(|c| c.to_toml()).map_err(Failure::from).map(|t| print!("{t}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Partial(m)) | Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
    }
}
