//! `pulsedamp` command-line front end.
//!
//! Exit codes: 0 when every requested certificate is verified, 2 when one is
//! falsified, 1 on input or I/O errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pulsedamp::analysis::DEFAULT_SEED;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] pulsedamp::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Outcome of a successful run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Verified,
    Falsified,
    /// Nothing was certified.
    Done,
}

#[derive(Parser, Debug)]
#[command(name = "pulsedamp", version, about = "Design and certify pulsating damping profiles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Periodic bipulse profile with exponential decay rate R for one frequency.
    DesignOde(DesignOdeArgs),
    /// Block profile following a prescribed envelope phi for one frequency.
    DesignAny(DesignAnyArgs),
    /// Periodic profile for a finite set of frequencies.
    DesignSystem(DesignSystemArgs),
    /// Spectral-split profile: pulses for low modes, constant damping for high ones.
    DesignPde(DesignPdeArgs),
    /// Concatenated split blocks with faster-than-exponential decay.
    DesignUltra(DesignUltraArgs),
    /// Lipschitz-continuous trapezoidal profile for one frequency.
    DesignLip(DesignLipArgs),
    /// Check a decay claim for a profile file.
    Certify(CertifyArgs),
    /// Check the energy lower bound exp(-4 int delta) by simulation.
    LowerBound(LowerBoundArgs),
    /// Build the slowly decaying solution under overdamping.
    SlowSolution(SlowArgs),
    /// Tabulate T_n, S_n, U_n for a model spectrum and check growth orders.
    SpectrumTable(TableArgs),
    /// Certify single-frequency exponential designs over a grid of (lambda, R).
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Write the designed profile here.
    #[arg(long)]
    pub profile_out: Option<PathBuf>,
    /// Write energy samples (CSV) here.
    #[arg(long)]
    pub samples_out: Option<PathBuf>,
    /// Write the report here (it is always printed to stdout).
    #[arg(long)]
    pub report_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct CheckArgs {
    /// Horizon in multiples of the design period.
    #[arg(long)]
    pub periods: Option<f64>,
    /// Absolute horizon; overrides --periods.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Number of random initial states.
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Run without the thread pool.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SpectrumArgs {
    /// Single frequency.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated increasing frequencies.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub spectrum: Option<Vec<f64>>,
    /// Model operator generating the spectrum.
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    #[arg(long, default_value_t = 1)]
    pub dim: u32,
    /// Number of modes of the model spectrum.
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Wave,
    Beam,
}

#[derive(Args, Debug)]
pub struct DesignOdeArgs {
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub rate: f64,
    /// Replace jumps by smooth transitions.
    #[arg(long)]
    pub smooth: bool,
    /// L2 budget of the smoothing (default derived from the mass margin).
    #[arg(long, requires = "smooth")]
    pub budget: Option<f64>,
    #[arg(long)]
    pub certify: bool,
    #[command(flatten)]
    pub check: CheckArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct DesignAnyArgs {
    #[arg(long)]
    pub lambda: f64,
    /// CSV of (t, phi) pairs.
    #[arg(long)]
    pub envelope: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub blocks: usize,
    #[arg(long)]
    pub certify: bool,
    #[command(flatten)]
    pub check: CheckArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct DesignSystemArgs {
    #[command(flatten)]
    pub spectrum: SpectrumArgs,
    #[arg(long)]
    pub rate: f64,
    /// Use one pulse refinement for all modes.
    #[arg(long)]
    pub common_n: bool,
    #[arg(long)]
    pub certify: bool,
    #[command(flatten)]
    pub check: CheckArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct DesignPdeArgs {
    #[command(flatten)]
    pub spectrum: SpectrumArgs,
    #[arg(long)]
    pub rate: f64,
    #[arg(long)]
    pub common_n: bool,
    /// Constant damping on the second half (default R + lambda_1).
    #[arg(long, conflicts_with = "smooth")]
    pub level: Option<f64>,
    #[arg(long)]
    pub smooth: bool,
    #[arg(long, requires = "smooth")]
    pub budget: Option<f64>,
    #[arg(long)]
    pub certify: bool,
    #[command(flatten)]
    pub check: CheckArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct DesignUltraArgs {
    #[command(flatten)]
    pub spectrum: SpectrumArgs,
    /// Stop after this many blocks.
    #[arg(long)]
    pub max_blocks: Option<usize>,
    #[arg(long)]
    pub certify: bool,
    #[command(flatten)]
    pub check: CheckArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct DesignLipArgs {
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub rate: f64,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub certify: bool,
    #[command(flatten)]
    pub check: CheckArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    /// Profile file to check.
    #[arg(long)]
    pub profile: PathBuf,
    #[command(flatten)]
    pub spectrum: SpectrumArgs,
    /// Claimed exponential rate.
    #[arg(long, conflicts_with = "envelope")]
    pub rate: Option<f64>,
    /// Start of the exponential decay (default: one period).
    #[arg(long, requires = "rate")]
    pub offset: Option<f64>,
    /// Claimed envelope as CSV of (t, phi) pairs.
    #[arg(long)]
    pub envelope: Option<PathBuf>,
    /// Time from which the envelope claim applies.
    #[arg(long, default_value_t = 0.0, requires = "envelope")]
    pub valid_from: f64,
    #[command(flatten)]
    pub check: CheckArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct DampingArgs {
    /// Constant damping.
    #[arg(long, conflicts_with = "profile")]
    pub delta: Option<f64>,
    /// Profile file.
    #[arg(long)]
    pub profile: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LowerBoundArgs {
    #[arg(long)]
    pub lambda: f64,
    #[command(flatten)]
    pub damping: DampingArgs,
    /// Comma-separated check times.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub times: Vec<f64>,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SlowArgs {
    #[arg(long)]
    pub lambda: f64,
    #[command(flatten)]
    pub damping: DampingArgs,
    /// Time T from which delta >= lambda.
    #[arg(long, default_value_t = 0.0)]
    pub from: f64,
    /// End of the construction interval (default: 1.25 times the last check time).
    #[arg(long)]
    pub to: Option<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub times: Vec<f64>,
    /// Largest accepted equation residual.
    #[arg(long, default_value_t = 1e-7)]
    pub residual_tol: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct TableArgs {
    #[arg(long, value_enum)]
    pub model: Model,
    #[arg(long, default_value_t = 1)]
    pub dim: u32,
    #[arg(long)]
    pub count: usize,
    /// Last tabulated index (default: count).
    #[arg(long)]
    pub n_max: Option<usize>,
    /// CSV output path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub rates: Vec<f64>,
    #[command(flatten)]
    pub check: CheckArgs,
    /// CSV output path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report_out: Option<PathBuf>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("PULSEDAMP_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("PULSEDAMP_THREADS must be a positive integer, got `{raw}`")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Input(format!("cannot size the thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn dispatch(command: Command) -> Result<Verdict, CliError> {
    configure_threads()?;
    match command {
        Command::DesignOde(a) => commands::design_ode(a),
        Command::DesignAny(a) => commands::design_any(a),
        Command::DesignSystem(a) => commands::design_system(a),
        Command::DesignPde(a) => commands::design_pde(a),
        Command::DesignUltra(a) => commands::design_ultra(a),
        Command::DesignLip(a) => commands::design_lip(a),
        Command::Certify(a) => commands::certify(a),
        Command::LowerBound(a) => commands::lower_bound(a),
        Command::SlowSolution(a) => commands::slow_solution(a),
        Command::SpectrumTable(a) => commands::spectrum_table(a),
        Command::Sweep(a) => commands::sweep(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(Verdict::Verified | Verdict::Done) => ExitCode::SUCCESS,
        Ok(Verdict::Falsified) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
