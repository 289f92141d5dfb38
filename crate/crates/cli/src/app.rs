//! Command-line surface: argument parsing, dispatch and exit-code mapping.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use critzone::braking::{avoid_by_braking, BrakeDecision};
use critzone::steering::{avoid_by_steering, SteerConfig, SteeringDecision};
use critzone::zone::{compute_zone, default_grid, offset_grid, ZoneConfig};
use critzone::{Error as CoreError, ModelKind, RootConfig, SolverKind, SteeringAlgorithm};

use crate::bench;
use crate::config::{load_spec, ScenarioSpec};
use crate::output;

#[derive(Debug, Parser)]
#[command(
    name = "critzone",
    version,
    about = "Latest comfortable braking/steering intervention and critical zones for a lead-vehicle conflict"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form latest comfortable braking verdict for one scenario.
    Brake(BrakeArgs),
    /// Avoid-by-steering verdict for one scenario.
    Steer(SteerArgs),
    /// Critical-zone sweep over lateral offsets.
    Zone(ZoneArgs),
    /// Forward-search zone sweep (repeated online-style checks over gaps).
    Sweep(SweepArgs),
    /// Timing benchmark across models, algorithms and solvers.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Dm,
    Sscm,
    Km,
    Pmm,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Dm => ModelKind::Dynamic,
            ModelArg::Sscm => ModelKind::SteadyState,
            ModelArg::Km => ModelKind::Kinematic,
            ModelArg::Pmm => ModelKind::PointMass,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SolverArg {
    Newton,
    Halley,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Newton => SolverKind::Newton,
            SolverArg::Halley => SolverKind::Halley,
        }
    }
}

fn algorithm_from_number(n: u8) -> Result<SteeringAlgorithm, Failure> {
    match n {
        2 => Ok(SteeringAlgorithm::BackwardIntegrated),
        3 => Ok(SteeringAlgorithm::BackwardSimplified),
        4 => Ok(SteeringAlgorithm::Forward),
        other => Err(Failure::validation(format!("unknown algorithm '{other}' (expected 2, 3 or 4)"))),
    }
}

#[derive(Debug, Args)]
pub struct IoArgs {
    /// Scenario file (key = value lines); defaults apply when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Initial guess for the root finder (s).
    #[arg(long, default_value_t = 100.0)]
    pub t0: f64,
    /// Residual stopping tolerance (m).
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Trapezoidal integration step for the dynamic model (s).
    #[arg(long, default_value_t = 0.01)]
    pub dt_integration: f64,
}

impl SolveArgs {
    fn root_config(&self) -> RootConfig<f64> {
        RootConfig { t0: self.t0, tol: self.tol, ..RootConfig::default() }
    }
}

#[derive(Debug, Args)]
pub struct BrakeArgs {
    #[command(flatten)]
    pub io: IoArgs,
}

#[derive(Debug, Args)]
pub struct SteerArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Lateral vehicle model.
    #[arg(long, value_enum, default_value = "dm")]
    pub model: ModelArg,
    /// Steering algorithm: 2 backward, 3 backward-simplified, 4 forward.
    #[arg(long, default_value_t = 2)]
    pub algorithm: u8,
    /// Root-finding method.
    #[arg(long, value_enum, default_value = "halley")]
    pub solver: SolverArg,
    #[command(flatten)]
    pub solve: SolveArgs,
}

#[derive(Debug, Args)]
pub struct ZoneArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long, value_enum, default_value = "dm")]
    pub model: ModelArg,
    /// Steering algorithm: 2 backward, 3 backward-simplified, 4 forward.
    #[arg(long, default_value_t = 2)]
    pub algorithm: u8,
    #[arg(long, value_enum, default_value = "halley")]
    pub solver: SolverArg,
    /// Offset grid MIN:MAX:STEP in metres (default -3.7:0:0.1).
    #[arg(long)]
    pub grid: Option<String>,
    /// Worker threads for the sweep.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Lane width for the lane-exit exclusion rule (m).
    #[arg(long, default_value_t = 3.7)]
    pub lane_width: f64,
    #[command(flatten)]
    pub solve: SolveArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long, value_enum, default_value = "dm")]
    pub model: ModelArg,
    /// Offset grid MIN:MAX:STEP in metres (default -3.7:0:0.1).
    #[arg(long)]
    pub grid: Option<String>,
    /// Gap increment of the forward search (m).
    #[arg(long, default_value_t = 0.2)]
    pub step: f64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = 3.7)]
    pub lane_width: f64,
    #[command(flatten)]
    pub solve: SolveArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Warm-up repetitions (discarded).
    #[arg(long, default_value_t = 100)]
    pub warmup: usize,
    /// Measured repetitions.
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    /// Seed for the deterministic horizon jitter.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// Failure with the documented process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub category: &'static str,
    pub message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Self { code: 2, category: "validation", message: message.into() }
    }

    fn solver(message: impl Into<String>) -> Self {
        Self { code: 3, category: "solver", message: message.into() }
    }

    fn io(message: impl Into<String>) -> Self {
        Self { code: 4, category: "io", message: message.into() }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.category, self.message)
    }
}

fn classify(e: anyhow::Error) -> Failure {
    if let Some(core) = e.downcast_ref::<CoreError>() {
        return match core {
            CoreError::NonConvergence { .. } | CoreError::SingularDerivative { .. } => {
                Failure::solver(format!("{e:#}"))
            }
            CoreError::JordanDiagnostic(_) => Failure::solver(format!("{e:#}")),
            _ => Failure::validation(format!("{e:#}")),
        };
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return Failure::io(format!("{e:#}"));
    }
    Failure::validation(format!("{e:#}"))
}

fn emit(out: Option<&PathBuf>, payload: &str) -> Result<(), Failure> {
    match out {
        None => {
            print!("{payload}");
            Ok(())
        }
        Some(path) => std::fs::write(path, payload)
            .map_err(|e| Failure::io(format!("writing {}: {e}", path.display()))),
    }
}

fn parse_grid(spec: Option<&str>) -> Result<Vec<f64>, Failure> {
    match spec {
        None => Ok(default_grid()),
        Some(s) => {
            let parts: Vec<_> = s.split(':').collect();
            if parts.len() != 3 {
                return Err(Failure::validation(format!("grid '{s}' is not MIN:MAX:STEP")));
            }
            let nums: Vec<f64> = parts
                .iter()
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| Failure::validation(format!("grid '{s}': {e}")))?;
            offset_grid(nums[0], nums[1], nums[2])
                .map_err(|e| Failure::validation(format!("grid '{s}': {e}")))
        }
    }
}

fn scenario_from(io: &IoArgs) -> Result<(ScenarioSpec, critzone::Scenario<f64>), Failure> {
    let spec = load_spec(io.scenario.as_deref()).map_err(classify)?;
    let scenario = spec.to_scenario().map_err(classify)?;
    Ok((spec, scenario))
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Brake(args) => run_brake(args),
        Command::Steer(args) => run_steer(args),
        Command::Zone(args) => run_zone(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Bench(args) => run_bench(args),
    }
}

fn run_brake(args: BrakeArgs) -> Result<(), Failure> {
    let (_, scenario) = scenario_from(&args.io)?;
    let decision = avoid_by_braking(&scenario.brake_state(), &scenario.comfort, scenario.x_margin)
        .map_err(|e| classify(e.into()))?;
    let report = match &decision {
        BrakeDecision::NotNeeded => output::brake_report(None),
        BrakeDecision::Computed(o) => output::brake_report(Some(o)),
    };
    let payload = match args.io.format.unwrap_or(Format::Text) {
        Format::Json => serde_json::to_string_pretty(&report).expect("schema") + "\n",
        Format::Text => output::text_lines(&report),
        Format::Csv => return Err(Failure::validation("brake has no CSV form; use text or json")),
    };
    emit(args.io.out.as_ref(), &payload)
}

fn run_steer(args: SteerArgs) -> Result<(), Failure> {
    let (_, scenario) = scenario_from(&args.io)?;
    let algorithm = algorithm_from_number(args.algorithm)?;
    let cfg = SteerConfig {
        root: args.solve.root_config(),
        solver: args.solver.into(),
        dt_integration: args.solve.dt_integration,
    };
    let decision = avoid_by_steering(&scenario, args.model.into(), algorithm, &cfg)
        .map_err(|e| classify(e.into()))?;
    let report = match &decision {
        SteeringDecision::NoRisk { .. } => output::steer_report(None),
        SteeringDecision::Outcome(o) => output::steer_report(Some(o)),
    };
    let payload = match args.io.format.unwrap_or(Format::Text) {
        Format::Json => serde_json::to_string_pretty(&report).expect("schema") + "\n",
        Format::Text => output::text_lines(&report),
        Format::Csv => return Err(Failure::validation("steer has no CSV form; use text or json")),
    };
    emit(args.io.out.as_ref(), &payload)
}

fn zone_payload(
    zone: &critzone::ZoneBoundary<f64>,
    format: Format,
) -> Result<String, Failure> {
    match format {
        Format::Csv => Ok(output::zone_csv(zone)),
        Format::Json => Ok(output::zone_json(zone) + "\n"),
        Format::Text => Ok(output::zone_csv(zone)),
    }
}

fn run_zone(args: ZoneArgs) -> Result<(), Failure> {
    let (_, scenario) = scenario_from(&args.io)?;
    let algorithm = algorithm_from_number(args.algorithm)?;
    let grid = parse_grid(args.grid.as_deref())?;
    let cfg = ZoneConfig {
        algorithm,
        solver: args.solver.into(),
        root: args.solve.root_config(),
        dt_integration: args.solve.dt_integration,
        lane_width: args.lane_width,
        threads: args.threads,
        ..ZoneConfig::default()
    };
    let zone = compute_zone(&scenario, args.model.into(), &grid, &cfg)
        .map_err(|e| classify(e.into()))?;
    let payload = zone_payload(&zone, args.io.format.unwrap_or(Format::Csv))?;
    emit(args.io.out.as_ref(), &payload)
}

fn run_sweep(args: SweepArgs) -> Result<(), Failure> {
    let (_, scenario) = scenario_from(&args.io)?;
    let grid = parse_grid(args.grid.as_deref())?;
    if !(args.step > 0.0) {
        return Err(Failure::validation("step must be positive"));
    }
    let cfg = ZoneConfig {
        algorithm: SteeringAlgorithm::Forward,
        root: args.solve.root_config(),
        dt_integration: args.solve.dt_integration,
        lane_width: args.lane_width,
        forward_step: args.step,
        threads: args.threads,
        ..ZoneConfig::default()
    };
    let zone = compute_zone(&scenario, args.model.into(), &grid, &cfg)
        .map_err(|e| classify(e.into()))?;
    let payload = zone_payload(&zone, args.io.format.unwrap_or(Format::Csv))?;
    emit(args.io.out.as_ref(), &payload)
}

fn run_bench(args: BenchArgs) -> Result<(), Failure> {
    if args.warmup < 100 || args.iters < 1000 {
        return Err(Failure::validation("bench requires --warmup >= 100 and --iters >= 1000"));
    }
    let report = bench::run(args.warmup, args.iters, args.seed).map_err(classify)?;
    let payload = match args.format.unwrap_or(Format::Text) {
        Format::Json => serde_json::to_string_pretty(&report).expect("schema") + "\n",
        _ => report.table(),
    };
    emit(args.out.as_ref(), &payload)
}
