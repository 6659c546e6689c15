use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cachebandit::spo::Solver;
use cachebandit::xcli::{self, ExperimentConfig, SweepAxis, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "cachebandit", version, about = "Cache placement bandit simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Named preset (fig1_convergence, fig2_cucb_small, fig3_gamma, fig4_cache,
    /// fig5_users, fig6_files, spo_validation).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// TOML experiment file instead of a preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Multiplies the replication count of a preset.
    #[arg(long, default_value_t = 0.01)]
    scale: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "results")]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or configuration file.
    Simulate(RunArgs),
    /// Run a preset or configuration file over an explicit sweep grid.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// gamma, cache_size (percent of content), users, files or none.
        #[arg(long)]
        axis: String,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
    },
    /// Solve one placement from a CSV of value,weight rows.
    Solve {
        instance: PathBuf,
        #[arg(long)]
        capacity: u64,
        #[arg(long, default_value = "bnb")]
        solver: String,
        /// Branch-and-bound time limit in seconds.
        #[arg(long, default_value_t = 50.0)]
        timeout: f64,
    },
    /// Compare greedy against branch-and-bound on random instances.
    ValidateSpo {
        #[arg(long, default_value_t = 2000)]
        instances: usize,
        #[arg(long, default_value_t = 50.0)]
        timeout: f64,
        #[arg(long, default_value_t = xcli::presets::DEFAULT_SEED)]
        seed: u64,
    },
}

fn resolve(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match (&args.preset, &args.config) {
        (Some(name), None) => xcli::preset(name, args.scale, args.seed, &args.out)?,
        (None, Some(path)) => {
            let mut cfg = ExperimentConfig::load(path)
                .with_context(|| format!("reading {}", path.display()))?;
            if let Some(seed) = args.seed {
                cfg.master_seed = seed;
            }
            cfg.output.dir = args.out.clone();
            cfg
        }
        _ => bail!("pass exactly one of --preset or --config"),
    };
    if let Some(p) = args.parallelism {
        cfg.parallelism = p;
    }
    Ok(cfg)
}

fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    let (_, written) = xcli::run(cfg)?;
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn timeout(secs: f64) -> Result<Duration> {
    if !(secs > 0.0) || !secs.is_finite() {
        bail!("timeout must be a positive number of seconds");
    }
    Ok(Duration::from_secs_f64(secs))
}

fn solve(instance: &Path, capacity: u64, solver: &str, secs: f64) -> Result<()> {
    let solver = Solver::parse(solver, timeout(secs)?)?;
    let file = File::open(instance).with_context(|| format!("opening {}", instance.display()))?;
    println!("{}", xcli::solve_cmd(file, capacity, solver)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => resolve(args).and_then(|cfg| simulate(&cfg)),
        Command::Sweep { run, axis, grid } => resolve(run).and_then(|mut cfg| {
            cfg.sweep.axis = SweepAxis::parse(axis)?;
            cfg.sweep.values = grid.clone();
            simulate(&cfg)
        }),
        Command::Solve {
            instance,
            capacity,
            solver,
            timeout,
        } => solve(instance, *capacity, solver, *timeout),
        Command::ValidateSpo {
            instances,
            timeout: secs,
            seed,
        } => timeout(*secs).and_then(|t| {
            let (_, summary) = xcli::validate_spo(*instances, t, *seed)?;
            println!("{summary}");
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
