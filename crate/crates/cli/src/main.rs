//! `anew`: evaluate, scan, certify and simulate accessible nonlinear witnesses.
//!
//! Exit codes: 0 success, 2 configuration error, 3 precondition failure,
//! 4 `check-access` did not certify the configuration.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Format, Mode, Preset};

#[derive(Parser, Debug)]
#[command(
    name = "anew",
    version,
    about = "Accessible nonlinear entanglement witnesses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Worked example defaults (witness, state, unitary, scan).
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Witness decomposition JSON file, or a builtin name (`w0`, `smolin`).
    #[arg(long)]
    pub witness: Option<String>,
    /// State spec as JSON (or a path to it), e.g. '{"family":"smolin","p":0.5}'.
    #[arg(long)]
    pub state: Option<String>,
    /// `swap` / `swap_AA'`, `identity`, a Pauli string such as `ZZ`, or a JSON matrix.
    #[arg(long)]
    pub unitary: Option<String>,
    /// Number of iteration steps.
    #[arg(long = "n", default_value_t = 10)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = Mode::Full)]
    pub mode: Mode,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single-point evaluation: w_0..w_n, the limit, κ, |k|, |c|, |d|.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Skip the closed-form limit (allows U² ≠ 1).
        #[arg(long)]
        skip_analytic: bool,
    },
    /// Parameter scan over phi (phase family) or p (white noise).
    Scan {
        #[command(flatten)]
        common: Common,
        /// `axis:start:end:steps`, e.g. `phi:0:2pi:101` or `p:0:1:101`.
        #[arg(long)]
        scan: Option<String>,
    },
    /// Accessibility certificate for the witness decomposition and unitary.
    CheckAccess {
        #[command(flatten)]
        common: Common,
        /// Also test the unital-algebra condition.
        #[arg(long)]
        sufficient: bool,
    },
    /// Finite-shot simulation with error bars and detection rates.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        shots: u64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Eval {
            common,
            skip_analytic,
        } => commands::eval(&common, skip_analytic),
        Command::Scan { common, scan } => commands::scan(&common, scan.as_deref()),
        Command::CheckAccess { common, sufficient } => commands::check_access(&common, sufficient),
        Command::Simulate {
            common,
            shots,
            trials,
            seed,
        } => commands::simulate(&common, shots, trials, seed),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
