//! Command-line entry point for the benchmark harness.
//!
//! `bench run` executes one experiment and writes traces, an aggregate CSV,
//! and a manifest into the output directory. `bench export` merges the
//! aggregates in a directory into plot-ready long-format CSV files. All
//! errors are reported on stderr with a nonzero exit status; traces from
//! trials that completed before a failure are still on disk.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use anatra_bench::{
    plot_export, run_experiment, BenchError, ExperimentSpec, NoiseChoice, Problem, SolverChoice,
};

#[derive(Parser)]
#[command(name = "bench", about = "Noisy-optimization benchmark harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment: every listed solver on one problem and noise
    /// source, over seeded independent trials.
    Run(RunArgs),
    /// Merge the aggregate CSVs in a directory into per-figure files.
    Export(ExportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Problem: quadratic-d2, quadratic-d10, rosenbrock, qaoa-c6, or
    /// qaoa-chvatal.
    #[arg(long)]
    problem: String,
    /// Noise kind: uniform, gaussian, or shots.
    #[arg(long)]
    noise: String,
    /// Noise level for uniform or gaussian noise.
    #[arg(long)]
    level: Option<f64>,
    /// Shot count for shot noise.
    #[arg(long)]
    shots: Option<usize>,
    /// Comma-separated solvers: anatra, spsa, det-mbtr.
    #[arg(long, default_value = "anatra,spsa,det-mbtr")]
    solvers: String,
    /// Independent trials per solver.
    #[arg(long, default_value_t = 30)]
    trials: usize,
    /// Evaluation budget, or "auto" for 25 per variable plus 25.
    #[arg(long, default_value = "auto")]
    budget: String,
    /// Base seed; trial i uses seed + i.
    #[arg(long, default_value_t = 1234)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Edge-list file replacing the built-in graph of a qaoa problem.
    #[arg(long)]
    graph: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Directory holding aggregate CSVs from earlier runs.
    #[arg(long = "in")]
    in_dir: PathBuf,
}

fn parse_noise(args: &RunArgs) -> Result<NoiseChoice, BenchError> {
    let level = || {
        args.level.ok_or_else(|| {
            BenchError::InvalidSpec(format!("--noise {} requires --level", args.noise))
        })
    };
    match args.noise.as_str() {
        "uniform" => Ok(NoiseChoice::Uniform(level()?)),
        "gaussian" => Ok(NoiseChoice::Gaussian(level()?)),
        "shots" => {
            let shots = args.shots.ok_or_else(|| {
                BenchError::InvalidSpec("--noise shots requires --shots".into())
            })?;
            Ok(NoiseChoice::Shots(shots))
        }
        other => Err(BenchError::InvalidSpec(format!(
            "unknown noise kind {other:?}; expected uniform, gaussian, or shots"
        ))),
    }
}

fn parse_budget(text: &str) -> Result<Option<usize>, BenchError> {
    if text == "auto" {
        return Ok(None);
    }
    text.parse::<usize>().map(Some).map_err(|_| {
        BenchError::InvalidSpec(format!("budget must be \"auto\" or a positive integer, got {text:?}"))
    })
}

fn parse_solvers(text: &str) -> Result<Vec<SolverChoice>, BenchError> {
    if text.trim().is_empty() {
        return Err(BenchError::InvalidSpec("solver list is empty".into()));
    }
    text.split(',').map(|name| SolverChoice::parse(name.trim())).collect()
}

fn build_spec(args: &RunArgs) -> Result<ExperimentSpec, BenchError> {
    let problem = Problem::parse(&args.problem)?;
    let noise = parse_noise(args)?;
    match noise {
        NoiseChoice::Shots(_) => {
            if args.level.is_some() {
                return Err(BenchError::InvalidSpec(
                    "--level does not apply to shot noise".into(),
                ));
            }
        }
        _ => {
            if args.shots.is_some() {
                return Err(BenchError::InvalidSpec(
                    "--shots only applies to --noise shots".into(),
                ));
            }
        }
    }
    let graph_override = match &args.graph {
        None => None,
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
                path: path.clone(),
                source,
            })?;
            let graph = anatra::Graph::parse(&text).map_err(|err| BenchError::Malformed {
                path: path.clone(),
                reason: err.to_string(),
            })?;
            Some(graph)
        }
    };
    let spec = ExperimentSpec {
        problem,
        noise,
        solvers: parse_solvers(&args.solvers)?,
        trials: args.trials,
        budget: parse_budget(&args.budget)?,
        seed: args.seed,
        graph_override,
    };
    spec.validate()?;
    Ok(spec)
}

fn run(args: &RunArgs) -> Result<(), BenchError> {
    let spec = build_spec(args)?;
    let output = run_experiment(&spec, &args.out)?;
    println!(
        "wrote {} traces, {} and {}",
        output.trace_paths.len(),
        output.aggregate_path.display(),
        output.manifest_path.display()
    );
    println!("series: {}", output.series.join(", "));
    Ok(())
}

fn export(args: &ExportArgs) -> Result<(), BenchError> {
    let written = plot_export(&args.in_dir)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Export(args) => export(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
