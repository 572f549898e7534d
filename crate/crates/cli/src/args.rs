use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use twophase::montecarlo::EstimatorKind;
use twophase::optimize::ObjectiveKind;
use twophase::qfi::DEFAULT_STEP;
use twophase::{Axis, PhasePair, SpinQuantum};

#[derive(Debug, Parser)]
#[command(name = "twophase", version, about = "Two-phase spin-rotation estimation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print spin matrices or rotated eigenbases.
    Ops(OpsArgs),
    /// QFI matrix, bound and achievability residual of a probe state.
    Qfi(QfiArgs),
    /// Closed-form sensitivities of every strategy over a range of j.
    Scan(ScanArgs),
    /// Monte Carlo estimation experiment.
    Simulate(SimulateArgs),
    /// Numerical probe-state search.
    Optimize(OptimizeArgs),
    /// Spin-squeezing diagnostics of a state.
    Squeeze(SqueezeArgs),
    /// Run the acceptance checks and print a pass/fail table.
    Verify(VerifyArgs),
}

pub fn parse_spin(s: &str) -> Result<SpinQuantum, String> {
    s.parse::<SpinQuantum>().map_err(|e| e.to_string())
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    s.parse::<Axis>().map_err(|e| e.to_string())
}

fn parse_rotation_axis(s: &str) -> Result<Axis, String> {
    match parse_axis(s)? {
        Axis::Z => Err("rotation axis must be x or y".into()),
        a => Ok(a),
    }
}

pub fn parse_phases(s: &str) -> Result<PhasePair, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected 'x,y', got {s:?}"))?;
    let x: f64 = x.trim().parse().map_err(|_| format!("bad phi_x in {s:?}"))?;
    let y: f64 = y.trim().parse().map_err(|_| format!("bad phi_y in {s:?}"))?;
    if !x.is_finite() || !y.is_finite() {
        return Err("phases must be finite".into());
    }
    Ok(PhasePair::new(x, y))
}

fn parse_estimator(s: &str) -> Result<EstimatorKind, String> {
    s.parse().map_err(|e: twophase::Error| e.to_string())
}

fn parse_objective(s: &str) -> Result<ObjectiveKind, String> {
    s.parse().map_err(|e: twophase::Error| e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OpsFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OpsAxis {
    X,
    Y,
    Z,
    All,
}

#[derive(Debug, Args)]
pub struct OpsArgs {
    #[arg(long, value_parser = parse_spin)]
    pub j: SpinQuantum,
    #[arg(long, value_enum, default_value = "all")]
    pub axis: OpsAxis,
    /// Print the eigenbasis |j,m>_axis (columns m = j..-j) instead of the matrix.
    #[arg(long)]
    pub basis: bool,
    #[arg(long, value_enum, default_value = "text")]
    pub format: OpsFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    Zeroth,
    First,
    Numeric,
}

#[derive(Debug, Args)]
pub struct QfiArgs {
    /// Spin; may be omitted when the state text names it.
    #[arg(long, value_parser = parse_spin)]
    pub j: Option<SpinQuantum>,
    #[arg(long)]
    pub state: String,
    #[arg(long, value_parser = parse_phases, allow_hyphen_values = true, default_value = "0,0")]
    pub phi: PhasePair,
    #[arg(long, value_enum, default_value = "zeroth")]
    pub order: OrderArg,
    /// Finite-difference step of the numeric route.
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScanFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, value_parser = parse_spin, default_value = "1/2")]
    pub jmin: SpinQuantum,
    #[arg(long, value_parser = parse_spin, default_value = "10")]
    pub jmax: SpinQuantum,
    /// Comma-separated strategy names, or `all`.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub strategies: Vec<String>,
    #[arg(long = "out", value_enum, default_value = "csv")]
    pub format: ScanFormat,
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON job file holding an experiment configuration.
    #[arg(long, conflicts_with_all = ["j", "probe", "phi", "m", "seed", "split", "repetitions", "estimator"])]
    pub job: Option<PathBuf>,
    #[arg(long, value_parser = parse_spin)]
    pub j: Option<SpinQuantum>,
    #[arg(long)]
    pub probe: Option<String>,
    #[arg(long, value_parser = parse_phases, allow_hyphen_values = true)]
    pub phi: Option<PhasePair>,
    /// Total number of probes M.
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of M spent on phi_x.
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long, value_parser = parse_estimator)]
    pub estimator: Option<EstimatorKind>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, value_parser = parse_spin)]
    pub j: SpinQuantum,
    #[arg(long, default_value_t = 0)]
    pub ancilla: usize,
    #[arg(long, value_parser = parse_objective, default_value = "trace_inverse_qfi")]
    pub objective: ObjectiveKind,
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Restrict two_mode_margin to product states.
    #[arg(long)]
    pub product: bool,
}

#[derive(Debug, Args)]
pub struct SqueezeArgs {
    #[arg(long, value_parser = parse_spin)]
    pub j: Option<SpinQuantum>,
    #[arg(long)]
    pub state: String,
    /// Rotation axis of the phase to estimate.
    #[arg(long, value_parser = parse_rotation_axis, default_value = "x")]
    pub axis: Axis,
    /// Evaluate the two-mode criterion on a j (x) j state.
    #[arg(long)]
    pub two_mode: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run only these criteria (comma-separated numbers).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u8>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: OpsFormat,
}
