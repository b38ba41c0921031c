//! `bflow`: command-line driver for buffered transport flows.
//!
//! Exit codes: 0 on success, 1 when the input or a requested check fails,
//! 2 on usage errors. Messages go to standard error; machine-readable
//! output is written to files under `--out`.

mod commands;
mod output;
mod plot;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "bflow", version, about = "Buffered transport flows on finite metric graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a graph spec against the standing assumptions.
    Validate(ValidateArgs),
    /// Connectivity, irreducibility, Perron vector and equilibrium summary.
    Analyze(AnalyzeArgs),
    /// Integrate the flow and write a trajectory.
    Simulate(SimulateArgs),
    /// Write the mass-matched equilibrium state.
    Equilibrium(EquilibriumArgs),
    /// Resolvent residuals for a seeded right-hand side.
    Resolvent(ResolventArgs),
    /// Matrix-scale perturbation checks on random generators.
    PerturbCheck(PerturbArgs),
    /// Generate a graph from a parameterized family.
    Family(FamilyArgs),
    /// Largest terminal distance over a basis of unit-mass initial states.
    ProbeNorm(ProbeArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GraphArgs {
    /// Graph-spec JSON file.
    #[arg(long)]
    pub graph: std::path::PathBuf,
    /// Cells per edge.
    #[arg(long, default_value_t = 128)]
    pub cells: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StepArgs {
    /// Fraction of the stable time step.
    #[arg(long, default_value_t = 0.9)]
    pub theta: f64,
    #[arg(long, default_value_t = 50.0)]
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileArg {
    Buffered,
    Unbuffered,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    #[arg(long)]
    pub graph: std::path::PathBuf,
    #[arg(long, value_enum, default_value_t = ProfileArg::Buffered)]
    pub profile: ProfileArg,
    /// Also write `validation.json` here.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long)]
    #[serde(skip)]
    pub out: std::path::PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitArg {
    /// Unit mass in the first buffer.
    Buffer,
    /// Seeded nonnegative random state of unit mass.
    Random,
    /// Smooth bump of unit mass on the first edge.
    Bump,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub step: StepArgs,
    /// Record a row every K steps.
    #[arg(long, default_value_t = 10)]
    pub cadence: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Buffer)]
    pub init: InitArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Decay-rate window `START,END`; defaults to the second half of the run.
    #[arg(long, value_parser = parse_window)]
    pub rate_window: Option<(f64, f64)>,
    /// Also record per-edge masses and run period detection.
    #[arg(long)]
    pub edge_masses: bool,
    /// Write `trajectory.svg` next to the CSV.
    #[arg(long)]
    pub plot: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: std::path::PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EquilibriumArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value_t = 1.0)]
    pub mass: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long)]
    #[serde(skip)]
    pub out: std::path::PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ResolventArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value_t = 5.0)]
    pub lambda: f64,
    /// Stop the Neumann series once a term has at most this norm.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = buffered_flow::resolvent::DEFAULT_MAX_TERMS)]
    pub max_terms: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: std::path::PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PerturbArgs {
    /// Largest matrix size; each trial draws its size from `[2, dim]`.
    #[arg(long, default_value_t = 20)]
    pub dim: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: std::path::PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Cycle,
    ForkMerge,
    RandomScc,
}

#[derive(Debug, Args, Serialize)]
pub struct FamilyArgs {
    #[arg(long, value_enum)]
    pub kind: FamilyKind,
    #[arg(long)]
    pub size: usize,
    #[arg(long, default_value_t = 0.3)]
    pub buffer_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Writes `graph.json` into this directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: std::path::PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub step: StepArgs,
    #[arg(long, default_value_t = 32)]
    pub basis: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: std::path::PathBuf,
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected START,END")?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad number {a:?}"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad number {b:?}"))?;
    if !(a < b) {
        return Err("window start must be below its end".into());
    }
    Ok((a, b))
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    /// Bad input data or a failed check (exit 1).
    Check(String),
    /// Bad flags or parameter values (exit 2).
    Usage(String),
}

impl From<buffered_flow::Error> for Failure {
    fn from(e: buffered_flow::Error) -> Self {
        use buffered_flow::Error as E;
        match e {
            E::InvalidParameter(_) | E::CflViolation { .. } | E::ZeroMass(_) | E::DimensionMismatch { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Check(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Check(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Validate(a) => commands::validate(&a),
        Command::Analyze(a) => commands::analyze(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Equilibrium(a) => commands::equilibrium(&a),
        Command::Resolvent(a) => commands::resolvent(&a),
        Command::PerturbCheck(a) => commands::perturb_check(&a),
        Command::Family(a) => commands::family(&a),
        Command::ProbeNorm(a) => commands::probe_norm(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("bflow: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("bflow: {msg}");
            ExitCode::from(2)
        }
    }
}
