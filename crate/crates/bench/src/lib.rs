//! Benchmark harness for the solver suite: seeded multi-trial experiments,
//! per-trial JSONL trace files, median best-so-far aggregation, and
//! plot-ready exports.
//!
//! An experiment pairs one problem with one noise source and runs every
//! requested solver for a number of independent trials. Each trial writes a
//! trace file named `trace_{problem}_{noise}_{solver}_t{NN}.jsonl` whose
//! first line is a JSON header (problem, solver, trial, seed, starting
//! point, budget) and whose remaining lines are the run's evaluation and
//! iteration records. Per solver, each trial's trace is reduced to the
//! running minimum of the noiseless objective over evaluations, padded with
//! its last value to exactly the budget; the pointwise median across trials
//! lands in `aggregate_{problem}_{noise}.csv` with columns
//! `eval_index,solver,median_best_true_value`. A
//! `manifest_{problem}_{noise}.json` records the full experiment
//! description. Everything is a pure function of the spec, so reruns are
//! byte-identical.
//!
//! Aggregation reads trace files back from the output directory rather than
//! reusing in-memory results. That is the import seam for external solvers:
//! drop a conforming trace file (header line plus records that carry
//! `true_value`) into the directory under the same naming scheme, rerun the
//! experiment, and the foreign solver appears as an extra series in the
//! aggregate. Solver names in file names must not contain underscores.
//!
//! Trials are independent and may run concurrently; the `BENCH_THREADS`
//! environment variable caps the worker count. Results are merged in trial
//! order, so parallelism never changes any output byte.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use anatra::{
    deterministic_mbtr_solve, noisy_quadratic, noisy_rosenbrock, shot_oracle, solve, spsa_solve,
    Graph, NoiseEstimateMode, NoiseSpec, QaoaCircuit, RunTrace, SolverConfig, SpsaConfig,
};

/// Circuit depth used by the QAOA benchmark problems; ten parameters.
pub const QAOA_DEPTH: usize = 5;

/// Salt separating the SPSA direction stream from the oracle noise stream
/// seeded by the same trial seed.
const SPSA_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Salt separating the QAOA starting-point draw from both of the above.
const THETA0_SEED_SALT: u64 = 0x517c_c1b7_2722_0a95;

/// Everything that can go wrong while running or exporting an experiment.
#[derive(Debug, Error)]
pub enum BenchError {
    /// The experiment description is self-contradictory or incomplete.
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    /// A solver or oracle failed inside a trial.
    #[error("{solver} trial {trial} failed: {source}")]
    Trial {
        /// Solver whose trial failed.
        solver: String,
        /// Zero-based trial index.
        trial: usize,
        /// The underlying solver or oracle error.
        source: anatra::Error,
    },
    /// A file could not be read or written.
    #[error("io error on {path}: {source}")]
    Io {
        /// The file involved.
        path: PathBuf,
        /// The underlying error.
        source: std::io::Error,
    },
    /// A trace or aggregate file exists but does not parse.
    #[error("malformed file {path}: {reason}")]
    Malformed {
        /// The offending file.
        path: PathBuf,
        /// What failed to parse.
        reason: String,
    },
    /// An evaluation record lacks the noiseless value aggregation needs.
    #[error("trace {path} is missing a true value at evaluation {eval_index}")]
    MissingTrueValue {
        /// The offending file.
        path: PathBuf,
        /// The evaluation without a noiseless value.
        eval_index: usize,
    },
    /// Export found nothing to export.
    #[error("no aggregate CSV files found in {0}")]
    NoAggregates(PathBuf),
}

impl BenchError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        BenchError::Io { path: path.to_path_buf(), source }
    }
}

/// The benchmark problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    /// Two-dimensional convex quadratic, started from all ones.
    QuadraticD2,
    /// Ten-dimensional convex quadratic, started from all ones.
    QuadraticD10,
    /// Two-dimensional Rosenbrock valley, started from the origin.
    Rosenbrock,
    /// MaxCut expectation of a depth-five circuit on the six-cycle.
    QaoaC6,
    /// MaxCut expectation of a depth-five circuit on the Chvatal graph.
    QaoaChvatal,
}

impl Problem {
    /// Every problem, in canonical order.
    pub const ALL: [Problem; 5] = [
        Problem::QuadraticD2,
        Problem::QuadraticD10,
        Problem::Rosenbrock,
        Problem::QaoaC6,
        Problem::QaoaChvatal,
    ];

    /// Parses a CLI problem name.
    ///
    /// # Errors
    ///
    /// [`BenchError::InvalidSpec`] when the name is not a known problem.
    pub fn parse(name: &str) -> Result<Self, BenchError> {
        Problem::ALL.iter().copied().find(|p| p.name() == name).ok_or_else(|| {
            BenchError::InvalidSpec(format!(
                "unknown problem {name:?}; expected one of quadratic-d2, quadratic-d10, \
                 rosenbrock, qaoa-c6, qaoa-chvatal"
            ))
        })
    }

    /// The CLI and file-name token for this problem.
    pub fn name(self) -> &'static str {
        match self {
            Problem::QuadraticD2 => "quadratic-d2",
            Problem::QuadraticD10 => "quadratic-d10",
            Problem::Rosenbrock => "rosenbrock",
            Problem::QaoaC6 => "qaoa-c6",
            Problem::QaoaChvatal => "qaoa-chvatal",
        }
    }

    /// Number of optimization variables.
    pub fn dimension(self) -> usize {
        match self {
            Problem::QuadraticD2 | Problem::Rosenbrock => 2,
            Problem::QuadraticD10 => 10,
            Problem::QaoaC6 | Problem::QaoaChvatal => 2 * QAOA_DEPTH,
        }
    }

    /// Default evaluation budget: twenty-five evaluations per variable plus
    /// one.
    pub fn default_budget(self) -> usize {
        25 * (self.dimension() + 1)
    }

    /// Whether the objective is a circuit expectation estimated from shots.
    pub fn is_qaoa(self) -> bool {
        matches!(self, Problem::QaoaC6 | Problem::QaoaChvatal)
    }

    /// The graph behind a circuit problem.
    ///
    /// # Panics
    ///
    /// Panics on non-circuit problems.
    pub fn graph(self) -> Graph {
        match self {
            Problem::QaoaC6 => Graph::cycle(6),
            Problem::QaoaChvatal => Graph::chvatal(),
            other => panic!("{} has no graph", other.name()),
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The noise source applied to the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseChoice {
    /// Additive noise drawn uniformly from `[-level, level]`.
    Uniform(f64),
    /// Additive Gaussian noise with standard deviation `level`.
    Gaussian(f64),
    /// Sampling noise from estimating an expectation with this many shots.
    Shots(usize),
}

impl NoiseChoice {
    /// The file-name token, e.g. `uniform-1e-1` or `shots-1000`.
    pub fn token(&self) -> String {
        match self {
            NoiseChoice::Uniform(level) => format!("uniform-{level:e}"),
            NoiseChoice::Gaussian(level) => format!("gaussian-{level:e}"),
            NoiseChoice::Shots(shots) => format!("shots-{shots}"),
        }
    }

    fn spec(&self) -> NoiseSpec {
        match self {
            NoiseChoice::Uniform(level) => NoiseSpec::uniform(*level),
            NoiseChoice::Gaussian(level) => NoiseSpec::gaussian(*level),
            NoiseChoice::Shots(_) => unreachable!("shot noise lives in the circuit oracle"),
        }
    }
}

impl fmt::Display for NoiseChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

/// The solvers the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    /// The noise-aware model-based trust-region solver.
    Anatra,
    /// Simultaneous-perturbation stochastic approximation.
    Spsa,
    /// The same trust-region loop with its noise allowance forced to zero.
    DetMbtr,
}

impl SolverChoice {
    /// Every solver, in canonical order.
    pub const ALL: [SolverChoice; 3] =
        [SolverChoice::Anatra, SolverChoice::Spsa, SolverChoice::DetMbtr];

    /// Parses a CLI solver name.
    ///
    /// # Errors
    ///
    /// [`BenchError::InvalidSpec`] when the name is not a known solver.
    pub fn parse(name: &str) -> Result<Self, BenchError> {
        SolverChoice::ALL.iter().copied().find(|s| s.name() == name).ok_or_else(|| {
            BenchError::InvalidSpec(format!(
                "unknown solver {name:?}; expected anatra, spsa, or det-mbtr"
            ))
        })
    }

    /// The CLI and file-name token for this solver.
    pub fn name(self) -> &'static str {
        match self {
            SolverChoice::Anatra => "anatra",
            SolverChoice::Spsa => "spsa",
            SolverChoice::DetMbtr => "det-mbtr",
        }
    }
}

impl fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A complete, reproducible experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    /// The objective.
    pub problem: Problem,
    /// The noise source.
    pub noise: NoiseChoice,
    /// Solvers to run, in output order.
    pub solvers: Vec<SolverChoice>,
    /// Number of independent trials per solver.
    pub trials: usize,
    /// Evaluation budget; `None` means the problem default.
    pub budget: Option<usize>,
    /// Base seed; trial `i` uses `seed + i`.
    pub seed: u64,
    /// Replacement graph for a circuit problem, e.g. from a `--graph` file.
    pub graph_override: Option<Graph>,
}

impl ExperimentSpec {
    /// A spec with the protocol defaults: all three solvers, thirty trials,
    /// the problem's default budget, and base seed 1234.
    pub fn new(problem: Problem, noise: NoiseChoice) -> Self {
        ExperimentSpec {
            problem,
            noise,
            solvers: SolverChoice::ALL.to_vec(),
            trials: 30,
            budget: None,
            seed: 1234,
            graph_override: None,
        }
    }

    /// The effective evaluation budget.
    pub fn budget(&self) -> usize {
        self.budget.unwrap_or_else(|| self.problem.default_budget())
    }

    /// Checks the spec for internal consistency.
    ///
    /// # Errors
    ///
    /// [`BenchError::InvalidSpec`] naming the first problem found.
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.trials == 0 {
            return Err(BenchError::InvalidSpec("trials must be at least 1".into()));
        }
        if self.solvers.is_empty() {
            return Err(BenchError::InvalidSpec("solver list is empty".into()));
        }
        for (i, solver) in self.solvers.iter().enumerate() {
            if self.solvers[..i].contains(solver) {
                return Err(BenchError::InvalidSpec(format!("solver {solver} listed twice")));
            }
        }
        match (self.problem.is_qaoa(), &self.noise) {
            (true, NoiseChoice::Shots(shots)) if *shots < 2 => {
                return Err(BenchError::InvalidSpec(format!(
                    "shot count {shots} is too small to estimate a standard error; use at least 2"
                )));
            }
            (true, NoiseChoice::Shots(_)) => {}
            (true, other) => {
                return Err(BenchError::InvalidSpec(format!(
                    "{} is sampled with shots; {} noise does not apply",
                    self.problem,
                    other.token()
                )));
            }
            (false, NoiseChoice::Shots(_)) => {
                return Err(BenchError::InvalidSpec(format!(
                    "{} is a synthetic objective; choose uniform or gaussian noise with --level",
                    self.problem
                )));
            }
            (false, NoiseChoice::Uniform(level)) | (false, NoiseChoice::Gaussian(level)) => {
                if !(level.is_finite() && *level >= 0.0) {
                    return Err(BenchError::InvalidSpec(format!(
                        "noise level {level} must be finite and nonnegative"
                    )));
                }
            }
        }
        if self.graph_override.is_some() && !self.problem.is_qaoa() {
            return Err(BenchError::InvalidSpec(format!(
                "--graph only applies to circuit problems, not {}",
                self.problem
            )));
        }
        if let Some(budget) = self.budget {
            if budget < 2 {
                return Err(BenchError::InvalidSpec(format!(
                    "budget {budget} cannot cover a single solver step"
                )));
            }
        }
        Ok(())
    }

    /// The seed owned by one trial.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }

    /// The starting point for one trial: all ones for quadratics, the origin
    /// for Rosenbrock, and a per-trial uniform draw from `[0, 2 pi)` per
    /// parameter for circuit problems.
    pub fn theta0(&self, trial: usize) -> DVector<f64> {
        let d = self.problem.dimension();
        match self.problem {
            Problem::QuadraticD2 | Problem::QuadraticD10 => DVector::from_element(d, 1.0),
            Problem::Rosenbrock => DVector::zeros(d),
            Problem::QaoaC6 | Problem::QaoaChvatal => {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(self.trial_seed(trial) ^ THETA0_SEED_SALT);
                DVector::from_fn(d, |_, _| rng.random::<f64>() * std::f64::consts::TAU)
            }
        }
    }

    fn graph(&self) -> Graph {
        self.graph_override.clone().unwrap_or_else(|| self.problem.graph())
    }

    fn solver_config(&self) -> SolverConfig {
        let mut config = SolverConfig::for_dimension(self.problem.dimension());
        config.budget = self.budget();
        config.noise_mode = match self.noise {
            NoiseChoice::Uniform(level) | NoiseChoice::Gaussian(level) => {
                NoiseEstimateMode::Exact(level)
            }
            NoiseChoice::Shots(_) => NoiseEstimateMode::StandardError,
        };
        config
    }
}

/// First line of every trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    /// Problem token.
    pub problem: String,
    /// Solver token.
    pub solver: String,
    /// Zero-based trial index.
    pub trial: usize,
    /// The trial's seed.
    pub seed: u64,
    /// The starting point handed to the solver.
    pub theta0: Vec<f64>,
    /// The evaluation budget.
    pub budget: usize,
}

/// One finished trial.
#[derive(Debug, Clone)]
pub struct TrialRun {
    /// Which solver ran.
    pub solver: SolverChoice,
    /// Zero-based trial index.
    pub trial: usize,
    /// The file header describing the trial.
    pub header: TraceHeader,
    /// The full run trace.
    pub trace: RunTrace,
}

/// Experiment description stored next to the outputs, free of anything
/// nondeterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentManifest {
    /// Problem token.
    pub problem: String,
    /// Noise token.
    pub noise: String,
    /// Solver tokens in output order.
    pub solvers: Vec<String>,
    /// Trials per solver.
    pub trials: usize,
    /// Effective evaluation budget.
    pub budget: usize,
    /// Base seed.
    pub seed: u64,
    /// Trace files written by this run.
    pub traces: Vec<String>,
    /// The aggregate CSV file.
    pub aggregate: String,
}

/// Files produced by one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// Trace files written by this run, in solver-then-trial order.
    pub trace_paths: Vec<PathBuf>,
    /// The aggregate CSV.
    pub aggregate_path: PathBuf,
    /// The manifest JSON.
    pub manifest_path: PathBuf,
    /// Solver tokens aggregated, own solvers first, then imports.
    pub series: Vec<String>,
}

fn trace_file_name(problem: Problem, noise: &NoiseChoice, solver: &str, trial: usize) -> String {
    format!("trace_{}_{}_{}_t{:02}.jsonl", problem.name(), noise.token(), solver, trial)
}

fn aggregate_file_name(problem: Problem, noise: &NoiseChoice) -> String {
    format!("aggregate_{}_{}.csv", problem.name(), noise.token())
}

fn manifest_file_name(problem: Problem, noise: &NoiseChoice) -> String {
    format!("manifest_{}_{}.json", problem.name(), noise.token())
}

/// Writes one trial's header line and trace records.
///
/// # Errors
///
/// [`BenchError::Io`] when the file cannot be written.
pub fn write_trial_trace(
    path: &Path,
    header: &TraceHeader,
    trace: &RunTrace,
) -> Result<(), BenchError> {
    let mut buffer = Vec::new();
    serde_json::to_writer(&mut buffer, header)
        .expect("a trace header always serializes");
    buffer.push(b'\n');
    trace.write_jsonl(&mut buffer).map_err(|source| BenchError::io(path, source))?;
    fs::write(path, buffer).map_err(|source| BenchError::io(path, source))
}

/// Reads one trace file back into its header and records.
///
/// # Errors
///
/// [`BenchError::Io`] when the file cannot be read and
/// [`BenchError::Malformed`] when either line fails to parse.
pub fn read_trial_trace(path: &Path) -> Result<(TraceHeader, RunTrace), BenchError> {
    let text = fs::read_to_string(path).map_err(|source| BenchError::io(path, source))?;
    let (first, rest) = text.split_once('\n').ok_or_else(|| BenchError::Malformed {
        path: path.to_path_buf(),
        reason: "file has no header line".into(),
    })?;
    let header: TraceHeader =
        serde_json::from_str(first).map_err(|err| BenchError::Malformed {
            path: path.to_path_buf(),
            reason: format!("header line: {err}"),
        })?;
    let trace = RunTrace::read_jsonl(rest.as_bytes()).map_err(|err| BenchError::Malformed {
        path: path.to_path_buf(),
        reason: format!("trace records: {err}"),
    })?;
    Ok((header, trace))
}

/// The running minimum of the noiseless objective over a trace's
/// evaluations, padded with its last value to exactly `budget` entries.
///
/// # Errors
///
/// [`BenchError::Malformed`] when the trace has no evaluations and
/// [`BenchError::MissingTrueValue`] when a record lacks the noiseless value;
/// `path` only labels the error.
pub fn best_true_curve(
    trace: &RunTrace,
    budget: usize,
    path: &Path,
) -> Result<Vec<f64>, BenchError> {
    if trace.evaluations.is_empty() {
        return Err(BenchError::Malformed {
            path: path.to_path_buf(),
            reason: "trace has no evaluations".into(),
        });
    }
    let mut curve = Vec::with_capacity(budget);
    let mut best = f64::INFINITY;
    for record in trace.evaluations.iter().take(budget) {
        let truth = record.true_value.ok_or(BenchError::MissingTrueValue {
            path: path.to_path_buf(),
            eval_index: record.eval_index,
        })?;
        best = best.min(truth);
        curve.push(best);
    }
    while curve.len() < budget {
        curve.push(best);
    }
    Ok(curve)
}

/// Median by averaging the two middle order statistics when the count is
/// even.
fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn run_trial(
    spec: &ExperimentSpec,
    solver: SolverChoice,
    trial: usize,
) -> Result<TrialRun, BenchError> {
    let theta0 = spec.theta0(trial);
    let seed = spec.trial_seed(trial);
    let trial_error = |source| BenchError::Trial { solver: solver.name().into(), trial, source };

    let outcome = match (spec.problem.is_qaoa(), solver) {
        (false, _) => {
            let mut oracle = match spec.problem {
                Problem::Rosenbrock => noisy_rosenbrock(spec.noise.spec(), seed),
                _ => noisy_quadratic(spec.problem.dimension(), spec.noise.spec(), seed),
            };
            run_solver(spec, solver, &mut oracle, &theta0, seed)
        }
        (true, _) => {
            let shots = match spec.noise {
                NoiseChoice::Shots(shots) => shots,
                _ => unreachable!("validated: circuit problems use shot noise"),
            };
            let circuit = QaoaCircuit::new(spec.graph(), QAOA_DEPTH);
            let mut oracle = shot_oracle(circuit, shots, seed).map_err(trial_error)?;
            run_solver(spec, solver, &mut oracle, &theta0, seed)
        }
    };
    let (_, _, trace) = outcome.map_err(trial_error)?;

    let header = TraceHeader {
        problem: spec.problem.name().into(),
        solver: solver.name().into(),
        trial,
        seed,
        theta0: theta0.iter().copied().collect(),
        budget: spec.budget(),
    };
    Ok(TrialRun { solver, trial, header, trace })
}

fn run_solver<O: anatra::ZerothOrderOracle + ?Sized>(
    spec: &ExperimentSpec,
    solver: SolverChoice,
    oracle: &mut O,
    theta0: &DVector<f64>,
    seed: u64,
) -> Result<(DVector<f64>, f64, RunTrace), anatra::Error> {
    match solver {
        SolverChoice::Anatra => solve(oracle, theta0, &spec.solver_config()),
        SolverChoice::DetMbtr => deterministic_mbtr_solve(oracle, theta0, &spec.solver_config()),
        SolverChoice::Spsa => {
            let config = SpsaConfig::new(spec.budget(), seed ^ SPSA_SEED_SALT);
            spsa_solve(oracle, theta0, &config)
        }
    }
}

/// Builds a rayon pool sized by the `BENCH_THREADS` environment variable, or
/// `None` to use the global default.
fn thread_pool() -> Result<Option<rayon::ThreadPool>, BenchError> {
    let Some(raw) = std::env::var_os("BENCH_THREADS") else {
        return Ok(None);
    };
    let parsed = raw
        .to_str()
        .and_then(|text| text.parse::<usize>().ok())
        .filter(|&threads| threads >= 1)
        .ok_or_else(|| {
            BenchError::InvalidSpec(format!(
                "BENCH_THREADS must be a positive integer, got {raw:?}"
            ))
        })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parsed)
        .build()
        .map_err(|err| BenchError::InvalidSpec(format!("thread pool: {err}")))?;
    Ok(Some(pool))
}

/// Runs every solver for every trial, writes traces, and aggregates.
///
/// Trials run concurrently when a pool is available; outputs are merged in
/// trial order so the results are identical either way. When some trials
/// fail, every completed trial's trace is still written before the first
/// error is returned. Trace files from a previous run of the same spec are
/// removed first; files belonging to other solvers, including imported
/// ones, are left in place and join the aggregate.
///
/// # Errors
///
/// Spec validation, trial, and file errors, in that order of detection.
pub fn run_experiment(
    spec: &ExperimentSpec,
    out_dir: &Path,
) -> Result<ExperimentOutput, BenchError> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|source| BenchError::io(out_dir, source))?;

    for solver in &spec.solvers {
        remove_stale_traces(out_dir, spec, solver.name())?;
    }

    let jobs: Vec<(SolverChoice, usize)> = spec
        .solvers
        .iter()
        .flat_map(|&solver| (0..spec.trials).map(move |trial| (solver, trial)))
        .collect();
    let worker = |&(solver, trial): &(SolverChoice, usize)| run_trial(spec, solver, trial);
    let results: Vec<Result<TrialRun, BenchError>> = match thread_pool()? {
        Some(pool) => pool.install(|| jobs.par_iter().map(worker).collect()),
        None => jobs.par_iter().map(worker).collect(),
    };

    let mut trace_paths = Vec::new();
    let mut first_error = None;
    for result in results {
        match result {
            Ok(run) => {
                let name =
                    trace_file_name(spec.problem, &spec.noise, run.solver.name(), run.trial);
                let path = out_dir.join(name);
                write_trial_trace(&path, &run.header, &run.trace)?;
                trace_paths.push(path);
            }
            Err(err) => first_error = first_error.or(Some(err)),
        }
    }
    if let Some(err) = first_error {
        return Err(err);
    }

    let (aggregate_path, series) = aggregate_experiment(out_dir, spec)?;

    let manifest = ExperimentManifest {
        problem: spec.problem.name().into(),
        noise: spec.noise.token(),
        solvers: spec.solvers.iter().map(|s| s.name().into()).collect(),
        trials: spec.trials,
        budget: spec.budget(),
        seed: spec.seed,
        traces: trace_paths
            .iter()
            .map(|p| p.file_name().expect("trace paths have names").to_string_lossy().into())
            .collect(),
        aggregate: aggregate_file_name(spec.problem, &spec.noise),
    };
    let manifest_path = out_dir.join(manifest_file_name(spec.problem, &spec.noise));
    let mut text = serde_json::to_string_pretty(&manifest)
        .expect("a manifest always serializes");
    text.push('\n');
    fs::write(&manifest_path, text).map_err(|source| BenchError::io(&manifest_path, source))?;

    Ok(ExperimentOutput { trace_paths, aggregate_path, manifest_path, series })
}

fn remove_stale_traces(
    dir: &Path,
    spec: &ExperimentSpec,
    solver: &str,
) -> Result<(), BenchError> {
    let prefix = format!("trace_{}_{}_{}_t", spec.problem.name(), spec.noise.token(), solver);
    for entry in fs::read_dir(dir).map_err(|source| BenchError::io(dir, source))? {
        let entry = entry.map_err(|source| BenchError::io(dir, source))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if name.starts_with(&prefix) && name.ends_with(".jsonl") {
            fs::remove_file(entry.path())
                .map_err(|source| BenchError::io(&entry.path(), source))?;
        }
    }
    Ok(())
}

/// Trace files in `dir` for one experiment, grouped by solver token and
/// sorted by trial.
fn trace_files_by_solver(
    dir: &Path,
    spec: &ExperimentSpec,
) -> Result<BTreeMap<String, Vec<(usize, PathBuf)>>, BenchError> {
    let prefix = format!("trace_{}_{}_", spec.problem.name(), spec.noise.token());
    let mut groups: BTreeMap<String, Vec<(usize, PathBuf)>> = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|source| BenchError::io(dir, source))? {
        let entry = entry.map_err(|source| BenchError::io(dir, source))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(rest) = name.strip_prefix(&prefix).and_then(|r| r.strip_suffix(".jsonl"))
        else {
            continue;
        };
        let Some((solver, trial_token)) = rest.rsplit_once("_t") else { continue };
        let Ok(trial) = trial_token.parse::<usize>() else { continue };
        if solver.is_empty() {
            continue;
        }
        groups.entry(solver.to_string()).or_default().push((trial, entry.path()));
    }
    for trials in groups.values_mut() {
        trials.sort_by_key(|(trial, _)| *trial);
    }
    Ok(groups)
}

/// Reduces all trace files for the experiment to its aggregate CSV. Solvers
/// from the spec come first in spec order; any other solver tokens found in
/// the directory (imported traces) follow in name order.
fn aggregate_experiment(
    dir: &Path,
    spec: &ExperimentSpec,
) -> Result<(PathBuf, Vec<String>), BenchError> {
    let budget = spec.budget();
    let mut groups = trace_files_by_solver(dir, spec)?;

    let mut order: Vec<String> = spec.solvers.iter().map(|s| s.name().to_string()).collect();
    for solver in groups.keys() {
        if !order.contains(solver) {
            order.push(solver.clone());
        }
    }

    let mut csv = String::from("eval_index,solver,median_best_true_value\n");
    for solver in &order {
        let Some(files) = groups.remove(solver) else {
            return Err(BenchError::InvalidSpec(format!(
                "no trace files found for solver {solver}"
            )));
        };
        let mut curves = Vec::with_capacity(files.len());
        for (trial, path) in &files {
            let (header, trace) = read_trial_trace(path)?;
            if header.solver != *solver || header.problem != spec.problem.name() {
                return Err(BenchError::Malformed {
                    path: path.clone(),
                    reason: format!(
                        "header says problem {} solver {} but the file name says {} {} \
                         (trial {trial})",
                        header.problem,
                        header.solver,
                        spec.problem.name(),
                        solver
                    ),
                });
            }
            curves.push(best_true_curve(&trace, budget, path)?);
        }
        for eval_index in 0..budget {
            let mut column: Vec<f64> = curves.iter().map(|c| c[eval_index]).collect();
            let value = median(&mut column);
            csv.push_str(&format!("{},{},{}\n", eval_index + 1, solver, value));
        }
    }

    let path = dir.join(aggregate_file_name(spec.problem, &spec.noise));
    fs::write(&path, csv).map_err(|source| BenchError::io(&path, source))?;
    Ok((path, order))
}

/// The figure each problem's aggregates belong to.
const FIGURES: [(&str, &[&str]); 4] = [
    ("fig1_quadratic_d2.csv", &["quadratic-d2"]),
    ("fig2_quadratic_d10.csv", &["quadratic-d10"]),
    ("fig3_rosenbrock.csv", &["rosenbrock"]),
    ("fig4_qaoa.csv", &["qaoa-c6", "qaoa-chvatal"]),
];

/// Merges every aggregate CSV in `dir` into long-format per-figure files
/// (`problem,noise,solver,eval_index,median_best_true_value`), one per
/// figure that has data, and returns the files written.
///
/// # Errors
///
/// [`BenchError::NoAggregates`] when the directory holds no aggregates, plus
/// file and parse errors.
pub fn plot_export(dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let mut aggregates: Vec<(String, String, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(|source| BenchError::io(dir, source))? {
        let entry = entry.map_err(|source| BenchError::io(dir, source))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(stem) = name.strip_prefix("aggregate_").and_then(|r| r.strip_suffix(".csv"))
        else {
            continue;
        };
        let Some((problem, noise)) = stem.split_once('_') else {
            return Err(BenchError::Malformed {
                path: entry.path(),
                reason: "aggregate file name lacks a noise token".into(),
            });
        };
        aggregates.push((problem.to_string(), noise.to_string(), entry.path()));
    }
    if aggregates.is_empty() {
        return Err(BenchError::NoAggregates(dir.to_path_buf()));
    }
    aggregates.sort();

    let mut written = Vec::new();
    for (figure_name, problems) in FIGURES {
        let mut csv = String::from("problem,noise,solver,eval_index,median_best_true_value\n");
        let mut any = false;
        for (problem, noise, path) in &aggregates {
            if !problems.contains(&problem.as_str()) {
                continue;
            }
            any = true;
            let text = fs::read_to_string(path).map_err(|source| BenchError::io(path, source))?;
            for (number, line) in text.lines().enumerate().skip(1) {
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() != 3 {
                    return Err(BenchError::Malformed {
                        path: path.clone(),
                        reason: format!("line {} has {} fields", number + 1, fields.len()),
                    });
                }
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    problem, noise, fields[1], fields[0], fields[2]
                ));
            }
        }
        if any {
            let path = dir.join(figure_name);
            fs::write(&path, csv).map_err(|source| BenchError::io(&path, source))?;
            written.push(path);
        }
    }
    Ok(written)
}
