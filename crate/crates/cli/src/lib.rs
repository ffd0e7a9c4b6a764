//! Command-line front end.
//!
//! [`run_cli`] parses arguments, dispatches to a subcommand and maps errors
//! to exit codes: 0 on success, 1 on invalid input, 2 on runtime failure.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use hawkeslab::cluster_stats::{self, ClusterError};
use hawkeslab::experiments::{self, ExperimentError};
use hawkeslab::io::{self, IoError};
use hawkeslab::model::{stability_check, ExcitationMode, MarkDistribution, ModelError};
use hawkeslab::moments::{self, MomentError};
use hawkeslab::sim::{self, SimError};
use hawkeslab::transform::{self, FixedPointOptions, TransformError};
use hawkeslab::{NetworkModel, StreamKey, SCHEMA_VERSION};

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (schema ", "1", ")");

#[derive(Debug, Parser)]
#[command(name = "hawkeslab", version = VERSION, about = "Hawkes, delayed Hawkes and ephemeral birth-death processes")]
struct Cli {
    /// Worker threads (falls back to HAWKESLAB_THREADS, then all cores)
    #[arg(long, global = true, env = "HAWKESLAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate event logs to CSV
    Simulate(SimulateArgs),
    /// Transient factorial moments of a Markovian delayed model
    Moments(MomentsArgs),
    /// Joint transform E[z^Q(t) exp(-s Lambda(t))]
    Transform(TransformArgs),
    /// Total cluster-size distribution of a univariate model
    ClusterSize(ClusterSizeArgs),
    /// Run a Monte Carlo experiment from a JSON config
    Experiment(ExperimentArgs),
    /// Print the spectral radius of the branching matrix
    CheckStability(ConfigArg),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Model JSON file
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Engine {
    Cluster,
    Thinning,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    horizon: f64,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    /// Output directory; one CSV per replication
    #[arg(long)]
    out: PathBuf,
    /// Defaults to the cluster engine when the model allows it
    #[arg(long, value_enum)]
    engine: Option<Engine>,
}

#[derive(Debug, Args)]
struct MomentsArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    order: u32,
    /// Comma-separated times, or the horizon when --grid is given
    #[arg(long, value_delimiter = ',', required = true)]
    t: Vec<f64>,
    /// Report K + 1 equally spaced times on [0, t]
    #[arg(long)]
    grid: Option<usize>,
    /// Convert falling-factorial Q powers to raw powers
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TransformMethod {
    FixedPoint,
    Characteristics,
}

#[derive(Debug, Args)]
struct TransformArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    t: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    z: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    s: Vec<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_enum, default_value = "fixed-point")]
    method: TransformMethod,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClusterSizeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    n_max: usize,
    #[arg(long)]
    seed: u64,
    /// Simulated clusters
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Fclt,
    Flln,
    Dominance,
    Stationarity,
    HeavyTraffic,
    Tail,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    kind: ExperimentKind,
    /// Experiment JSON config
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Parse { .. } | IoError::Validation(_) => CliError::Invalid(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Model(_) | SimError::Unsupported(_) | SimError::InvalidHorizon(_) | SimError::KernelNotMonotone { .. } => {
                CliError::Invalid(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<TransformError> for CliError {
    fn from(e: TransformError) -> Self {
        match e {
            TransformError::NoConvergence { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<MomentError> for CliError {
    fn from(e: MomentError) -> Self {
        match e {
            MomentError::StiffSystem { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<ClusterError> for CliError {
    fn from(e: ClusterError) -> Self {
        match e {
            ClusterError::Sim(s) => s.into(),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Sim(s) => s.into(),
            ExperimentError::Moment(m) => m.into(),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

fn load(path: &Path) -> Result<NetworkModel, CliError> {
    Ok(io::load_model(path)?)
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Runtime(e.to_string())),
    }
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    Ok(io::to_json_string(value)?)
}

fn simulate(a: &SimulateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let model = load(&a.config)?;
    let engine = a.engine.unwrap_or(if model.has_routing() || !model.is_linear() {
        Engine::Thinning
    } else {
        Engine::Cluster
    });
    fs::create_dir_all(&a.out).map_err(|e| CliError::Runtime(format!("{}: {e}", a.out.display())))?;
    let key = StreamKey::new(a.seed);
    let logs = sim::replicate(a.reps, key, |k| match engine {
        Engine::Cluster => sim::cluster::simulate_paths(&model, a.horizon, k),
        Engine::Thinning => sim::thinning::simulate_network(&model, a.horizon, k),
    });
    let width = a.reps.saturating_sub(1).to_string().len();
    for (r, log) in logs.into_iter().enumerate() {
        let log = log?;
        let path = a.out.join(format!("rep_{r:0width$}.csv"));
        let file = fs::File::create(&path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        io::write_event_log_csv(&log, std::io::BufWriter::new(file))?;
    }
    writeln!(stdout, "wrote {} event logs to {}", a.reps, a.out.display()).map_err(|e| CliError::Runtime(e.to_string()))
}

#[derive(Serialize)]
struct MomentsOutput {
    schema_version: &'static str,
    order: u32,
    raw: bool,
    times: Vec<f64>,
    moments: std::collections::BTreeMap<String, Vec<f64>>,
}

fn moments_cmd(a: &MomentsArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let model = load(&a.config)?;
    let times: Vec<f64> = match a.grid {
        Some(k) => {
            let horizon = a.t.iter().cloned().fold(0.0, f64::max);
            (0..=k).map(|i| horizon * i as f64 / k.max(1) as f64).collect()
        }
        None => a.t.clone(),
    };
    let mut table = moments::solve_moments_transient(&model, a.order, &times)?;
    if a.raw {
        table = moments::factorial_to_raw(&table);
    }
    let out = MomentsOutput {
        schema_version: SCHEMA_VERSION,
        order: a.order,
        raw: a.raw,
        times,
        moments: table.to_map(),
    };
    emit(&json(&out)?, a.out.as_deref(), stdout)
}

#[derive(Serialize)]
struct TransformOutput {
    value: f64,
    iterations: usize,
    residual: f64,
    method: &'static str,
    t: f64,
    z: Vec<f64>,
    s: Vec<f64>,
}

fn transform_cmd(a: &TransformArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let model = load(&a.config)?;
    let out = match a.method {
        TransformMethod::FixedPoint => {
            let mut opts = FixedPointOptions::default();
            if let Some(tol) = a.tol {
                opts.tol = tol;
            }
            if let Some(steps) = a.steps {
                opts.steps = steps;
            }
            if let Some(m) = a.max_iter {
                opts.max_iter = m;
            }
            let r = transform::fixed_point_transform(&model, a.t, &a.z, &a.s, &opts)?;
            TransformOutput {
                value: r.value,
                iterations: r.iterations,
                residual: r.residual,
                method: "fixed_point",
                t: a.t,
                z: a.z.clone(),
                s: a.s.clone(),
            }
        }
        TransformMethod::Characteristics => TransformOutput {
            value: moments::characteristics_transform(&model, a.t, &a.z, &a.s)?,
            iterations: 0,
            residual: 0.0,
            method: "characteristics",
            t: a.t,
            z: a.z.clone(),
            s: a.s.clone(),
        },
    };
    emit(&json(&out)?, a.out.as_deref(), stdout)
}

/// Closed-form total-progeny pmf when the offspring law is Poisson or negative binomial.
fn closed_form(model: &NetworkModel, n: usize) -> Option<f64> {
    if model.mode == ExcitationMode::Ephemeral {
        return None;
    }
    let rho = model.kernels[0][0].l1_norm();
    match model.marks[0][0] {
        MarkDistribution::Deterministic { value } => cluster_stats::borel_pmf(n, value * rho).ok(),
        MarkDistribution::Exponential { rate } => cluster_stats::gamma_cluster_pmf(n, 1.0, rate, rho).ok(),
        MarkDistribution::Gamma { shape, rate } => cluster_stats::gamma_cluster_pmf(n, shape, rate, rho).ok(),
        _ => None,
    }
}

fn cluster_size(a: &ClusterSizeArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let model = load(&a.config)?;
    if model.d != 1 {
        return Err(CliError::Invalid("cluster-size needs a univariate model".into()));
    }
    let (freq, _) = cluster_stats::simulated_size_frequencies(&model, a.n_max, a.reps, StreamKey::new(a.seed).named("cluster_size"))?;
    let offspring: Vec<f64> = (0..a.n_max)
        .map(|k| cluster_stats::offspring_pmf(&model, k))
        .collect::<Result<_, _>>()
        .unwrap_or_default();
    let mut csv = String::from("n,closed_form,oracle,simulated_freq\n");
    for n in 1..=a.n_max {
        let cf = closed_form(&model, n).map(|v| v.to_string()).unwrap_or_default();
        let oracle = if offspring.is_empty() {
            String::new()
        } else {
            cluster_stats::hitting_time_pmf(|k| offspring.get(k).copied().unwrap_or(0.0), n, Some(n))?.to_string()
        };
        writeln!(csv, "{n},{cf},{oracle},{}", freq[n - 1]).expect("write to string");
    }
    emit(&csv, a.out.as_deref(), stdout)
}

#[derive(Serialize)]
struct ExperimentOutput<R: Serialize> {
    schema_version: &'static str,
    experiment: &'static str,
    seed: u64,
    pass: Option<bool>,
    thresholds: experiments::Thresholds,
    report: R,
}

fn experiment(a: &ExperimentArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let text = io::read_to_string(&a.config)?;
    let key = StreamKey::new(a.seed).named("experiment");
    let th = experiments::THRESHOLDS;
    let wrap = |name: &'static str, pass: Option<bool>, report: serde_json::Value| ExperimentOutput {
        schema_version: SCHEMA_VERSION,
        experiment: name,
        seed: a.seed,
        pass,
        thresholds: th,
        report,
    };
    let out = match a.kind {
        ExperimentKind::Fclt => {
            let r = experiments::fclt_run(&io::parse_json(&text)?, key)?;
            wrap("fclt", Some(r.pass), to_value(&r)?)
        }
        ExperimentKind::Flln => {
            let r = experiments::flln_check(&io::parse_json(&text)?, key)?;
            wrap("flln", Some(r.decreasing), to_value(&r)?)
        }
        ExperimentKind::Dominance => {
            let r = experiments::dominance_check(&io::parse_json(&text)?, key)?;
            wrap("dominance", Some(r.pass), to_value(&r)?)
        }
        ExperimentKind::Stationarity => {
            let r = experiments::stationarity_equality_check(&io::parse_json(&text)?, key)?;
            wrap("stationarity", Some(r.pass), to_value(&r)?)
        }
        ExperimentKind::HeavyTraffic => {
            let r = experiments::heavy_traffic_run(&io::parse_json(&text)?, key)?;
            wrap("heavy_traffic", Some(r.decreasing), to_value(&r)?)
        }
        ExperimentKind::Tail => {
            let r = experiments::tail_propagation_run(&io::parse_json(&text)?, key)?;
            wrap("tail", Some(r.contains_target), to_value(&r)?)
        }
    };
    emit(&json(&out)?, a.out.as_deref(), stdout)
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Runtime(e.to_string()))
}

#[derive(Serialize)]
struct StabilityOutput {
    spectral_radius: f64,
    stable: bool,
}

fn check_stability(a: &ConfigArg, stdout: &mut dyn Write) -> Result<(), CliError> {
    let model = load(&a.config)?;
    let s = stability_check(&model)?;
    emit(
        &json(&StabilityOutput {
            spectral_radius: s.spectral_radius,
            stable: s.stable,
        })?,
        None,
        stdout,
    )?;
    if s.stable {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("unstable: spectral radius {} >= 1", s.spectral_radius)))
    }
}

fn dispatch(command: &Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Simulate(a) => simulate(a, stdout),
        Command::Moments(a) => moments_cmd(a, stdout),
        Command::Transform(a) => transform_cmd(a, stdout),
        Command::ClusterSize(a) => cluster_size(a, stdout),
        Command::Experiment(a) => experiment(a, stdout),
        Command::CheckStability(a) => check_stability(a, stdout),
    }
}

/// Run the CLI on `args` (including the program name) and return the exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let run = || {
        let mut buf = Vec::new();
        let r = dispatch(&cli.command, &mut buf);
        (r, buf)
    };
    let (result, buf) = match cli.threads {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(e) => (Err(CliError::Runtime(e.to_string())), Vec::new()),
        },
        _ => run(),
    };
    let _ = stdout.write_all(&buf);
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.code()
        }
    }
}
