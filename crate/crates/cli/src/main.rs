//! `spt-mbqc`: builds models and runs the simulations, writing CSV tables and
//! a manifest sidecar per run. Exit codes: 0 ok, 2 validation, 3 numerical
//! failure, 4 usage.

mod commands;
mod output;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use spt_mbqc::gates::ReadoutSchedule;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "spt-mbqc", version, about = "Measurement-based computation on matrix-product resource states")]
pub struct Cli {
    /// Worker threads for parallel trials. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Output directory for CSV, JSON and manifest files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance for pass/fail checks (per-command default when absent).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    #[command(subcommand)]
    Model(ModelCommand),
    #[command(subcommand)]
    Run(RunCommand),
}

#[derive(Debug, Subcommand)]
pub enum ModelCommand {
    /// Cluster point of a Heisenberg-Weyl group, e.g. `Z2xZ2`.
    Build(BuildArgs),
    /// Symmetry-respecting random perturbation of a model.
    Perturb(PerturbArgs),
    /// Checks every model invariant; exit 2 lists the violations.
    Validate(ValidateArgs),
}

#[derive(Debug, Subcommand)]
pub enum RunCommand {
    /// Operator-Schmidt residual of the virtual state along an oblivious wire.
    Wire(WireArgs),
    /// Small-angle step channels and finite rotations against their targets.
    Gate(GateArgs),
    /// Weak-measurement readouts of `C_i^{-1}C_j` (estimate scatter).
    Measure(MeasureArgs),
    /// Self-test of the ν matrix from simulated experiments.
    Nu(NuArgs),
    /// Readout frequencies against Born probabilities.
    Born(BornArgs),
    /// Last-site law with the reversed boundary against a traced runway.
    Boundary(BoundaryArgs),
    /// Channel engine against the dense reference on short chains.
    Conform(ConformArgs),
    /// Accumulated filter functions on a phase grid.
    Filter(FilterArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct BuildArgs {
    #[arg(long, default_value = "Z2xZ2")]
    pub group: String,
    /// File name inside the output directory.
    #[arg(long, default_value = "model.json")]
    pub name: String,
}

#[derive(Debug, Args, Serialize)]
pub struct PerturbArgs {
    /// Base model; the `--group` cluster point when absent.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "Z2xZ2")]
    pub group: String,
    #[arg(long, default_value_t = 0.3)]
    pub strength: f64,
    #[arg(long, default_value_t = 2)]
    pub junk_dim: usize,
    #[arg(long, default_value = "model.json")]
    pub name: String,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    /// Model file (positional or `--model`).
    pub path: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct WireArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Longest wire.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct GateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, num_args = 2, value_names = ["I", "J"], default_values_t = [0, 1])]
    pub pair: Vec<usize>,
    #[arg(long, num_args = 1.., default_values_t = [1e-2, 1e-3, 1e-4])]
    pub dalpha: Vec<f64>,
    /// Basis phase in radians.
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    /// Wire sites after each tilted site; 30ξ when absent.
    #[arg(long)]
    pub wire_n: Option<usize>,
    /// Keep only the two tilted outcomes.
    #[arg(long)]
    pub heralded: bool,
    /// Total angle of the finite rotations.
    #[arg(long, default_value_t = 0.5)]
    pub angle: f64,
    #[arg(long, num_args = 1.., default_values_t = [100, 200, 400, 800])]
    pub steps: Vec<usize>,
}

/// Register used by readout commands: the model when given, otherwise an
/// eigenphase ladder `C_1 = diag(e^{2πik/levels})` with a two-outcome ν.
#[derive(Debug, Args, Serialize)]
pub struct RegisterArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, num_args = 2, value_names = ["I", "J"], default_values_t = [0, 1])]
    pub pair: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub nu00: f64,
    #[arg(long, default_value_t = 1.0)]
    pub nu11: f64,
    /// `|ν_10|`.
    #[arg(long, default_value_t = 0.9)]
    pub magnitude: f64,
    /// `δ` in `ν_10 = |ν_10| e^{−iδ}`, radians.
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 8)]
    pub levels: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct MeasureArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub register: RegisterArgs,
    /// Readout lengths `N_M`.
    #[arg(long, num_args = 1.., default_values_t = [1600])]
    pub nm: Vec<usize>,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    pub alpha: f64,
    #[arg(long, default_value_t = 200)]
    pub trials: u64,
    #[arg(long, value_enum, default_value = "cos-only")]
    pub schedule: ScheduleArg,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleArg {
    CosSin,
    CosOnly,
    Tuned,
}

impl From<ScheduleArg> for ReadoutSchedule {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::CosSin => ReadoutSchedule::CosSin,
            ScheduleArg::CosOnly => ReadoutSchedule::CosOnly,
            ScheduleArg::Tuned => ReadoutSchedule::Tuned,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct NuArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    /// Off-diagonal pairs as `i,j`; every pair when absent.
    #[arg(long, num_args = 1.., value_parser = parse_pair)]
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Args, Serialize)]
pub struct BornArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub register: RegisterArgs,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 200)]
    pub nm: usize,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    pub alpha: f64,
    /// Populations of the eigenspaces of C in eigenphase order; the rest is zero.
    #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = [0.7, 0.3])]
    pub weights: Vec<f64>,
    #[arg(long, value_enum, default_value = "cos-sin")]
    pub schedule: ScheduleArg,
}

#[derive(Debug, Args, Serialize)]
pub struct BoundaryArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Runway lengths; `0, ξ̄, 5ξ̄, 30ξ̄` when absent.
    #[arg(long, num_args = 1..)]
    pub runway: Vec<usize>,
    #[arg(long, default_value_t = 2000)]
    pub trials: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ConformArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Sites per scenario.
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    /// Largest dense resource in amplitudes (at most 2^26).
    #[arg(long, default_value_t = 1 << 20)]
    pub cap: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct FilterArgs {
    #[arg(long, default_value_t = 1.0)]
    pub nu00: f64,
    #[arg(long, default_value_t = 1.0)]
    pub nu11: f64,
    #[arg(long, default_value_t = 0.8)]
    pub magnitude: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    pub alpha: f64,
    /// Outcome counts as `n0,n1`.
    #[arg(long, num_args = 1.., value_parser = parse_pair, default_values = ["1,1", "5,5", "50,50"])]
    pub counts: Vec<(usize, usize)>,
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    /// Rescale ν to unit trace first.
    #[arg(long)]
    pub normalize: bool,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `i,j`, got `{s}`"))?;
    let p = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
    Ok((p(a)?, p(b)?))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build_global() {
        eprintln!("error: thread pool: {e}");
        return ExitCode::from(4);
    }
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
