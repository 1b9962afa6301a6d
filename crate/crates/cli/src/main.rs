//! `measkit` command-line front end.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::output::CliError;

#[derive(Parser, Debug, Serialize)]
#[command(
    name = "measkit",
    version,
    about = "Measurement-theory toolkit: pointer models, POVM compatibility, sampling and tomography"
)]
pub struct Cli {
    /// Seed for every random draw (fixed default, never wall-clock entropy).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the result here (plus a `<out>.manifest.json`) instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; the default depends on the subcommand.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Pointer sharpness η on a (κ, Δ) grid, numeric vs erf closed form (default format: csv).
    EtaSweep(EtaSweepArgs),
    /// Induced system POVM, from the Gaussian pointer model or from a unitary coupling.
    Induce(InduceArgs),
    /// Joint measurability of two POVMs (or instruments) by Dykstra projections.
    Compat(CompatArgs),
    /// Existence of a joint instrument for two instruments.
    JointInstrument(JointInstrumentArgs),
    /// Monte-Carlo outcome counts with per-label z-scores against the Born rule.
    Sample(SampleArgs),
    /// POVM tomography on the six Pauli probes with bootstrap error on η.
    Tomo(TomoArgs),
    /// Friend/Wigner instrument pair and its compatibility verdicts.
    WignerFriend(WignerFriendArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct EtaSweepArgs {
    /// Shift lengths κ (comma separated).
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub kappa: Vec<f64>,
    /// Pointer widths Δ (comma separated).
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub delta: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftArg {
    UpToPositive,
    UpToNegative,
}

#[derive(Args, Debug, Serialize)]
pub struct InduceArgs {
    /// Shift length κ of the pointer model.
    #[arg(long, requires = "delta", conflicts_with_all = ["unitary", "apparatus", "readout"])]
    pub kappa: Option<f64>,
    /// Pointer width Δ.
    #[arg(long, requires = "kappa")]
    pub delta: Option<f64>,
    /// Grid points for the pointer quadrature (default 4097).
    #[arg(long, requires = "kappa")]
    pub n_points: Option<usize>,
    /// Which way the σ_z = +1 component moves the pointer.
    #[arg(long, value_enum, default_value = "up-to-positive")]
    pub shift_sign: ShiftArg,
    /// Unitary on system ⊗ apparatus (matrix JSON).
    #[arg(long, requires_all = ["apparatus", "readout"])]
    pub unitary: Option<PathBuf>,
    /// Apparatus ready state (density-matrix JSON).
    #[arg(long, requires = "unitary")]
    pub apparatus: Option<PathBuf>,
    /// Apparatus readout POVM (POVM JSON).
    #[arg(long, requires = "unitary")]
    pub readout: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SolverArgs {
    /// Iteration budget of the Dykstra solver.
    #[arg(long, default_value_t = 20_000)]
    pub max_iter: usize,
    /// Marginal residual accepted as feasible.
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct CompatArgs {
    /// First POVM (or instrument) JSON.
    pub a: PathBuf,
    /// Second POVM (or instrument) JSON.
    pub b: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct JointInstrumentArgs {
    /// First instrument JSON (a POVM is read as its Lüders instrument).
    pub i: PathBuf,
    /// Second instrument JSON; omit together with --trivial-partner.
    #[arg(required_unless_present = "trivial_partner")]
    pub j: Option<PathBuf>,
    /// Use the one-outcome coarse-graining of the first instrument as partner.
    #[arg(long, conflicts_with = "j")]
    pub trivial_partner: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct SampleArgs {
    /// Instrument or POVM JSON (a POVM is measured with its Lüders instrument).
    #[arg(required_unless_present = "eta", conflicts_with = "eta")]
    pub instrument: Option<PathBuf>,
    /// Use the unsharp binary POVM ½(I ± η n·σ) instead of a file.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Axis n for --eta: x, y, z or three comma-separated components.
    #[arg(long, default_value = "z")]
    pub axis: String,
    /// Input state: 0, 1, +, -, +i, -i, mixed, or a density-matrix JSON path.
    #[arg(long, default_value = "0")]
    pub state: String,
    /// State used for the z-score comparison (defaults to --state).
    #[arg(long)]
    pub compare_state: Option<String>,
    /// Number of runs.
    #[arg(long)]
    pub shots: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct TomoArgs {
    /// Shift lengths κ of the pointer POVMs to reconstruct (comma separated).
    #[arg(long, value_delimiter = ',', num_args = 1.., required_unless_present = "povm", conflicts_with = "povm")]
    pub kappa: Vec<f64>,
    /// Pointer width Δ.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Binary qubit POVM JSON to reconstruct instead of a pointer POVM.
    #[arg(long)]
    pub povm: Option<PathBuf>,
    /// Shots per probe state.
    #[arg(long, default_value_t = 100_000)]
    pub shots: u64,
    /// Bootstrap resamples.
    #[arg(long, default_value_t = 200)]
    pub resamples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisArg {
    Bell,
    Record,
}

#[derive(Args, Debug, Serialize)]
pub struct WignerFriendArgs {
    /// System state: 0, 1, +, -, +i, -i, mixed, or a density-matrix JSON path.
    #[arg(long, default_value = "+")]
    pub state: String,
    /// Wigner's measurement basis on system ⊗ memory.
    #[arg(long, value_enum, default_value = "bell")]
    pub basis: BasisArg,
    /// Friend coupling angle θ in [0, π]; π is a full copy.
    #[arg(long, default_value_t = std::f64::consts::PI)]
    pub theta: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

impl From<measkit::Error> for CliError {
    fn from(e: measkit::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}
