//! Command-line front end: decompose matrices, compute spectra, classify
//! dichotomies, run Monte Carlo campaigns and build degenerate point sets
//! from JSON experiment files.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{ExperimentConfig, Format};
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "pointspec", version, about = "Point spectra of Sturm-Liouville operators with SL(2,R) point interactions")]
pub struct Cli {
    /// Experiment file (JSON, "schema": 1).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output file; stdout when absent. Overrides output.path of the config.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Output format. Overrides output.format of the config.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Override the Monte Carlo ensemble seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// No progress or summary lines on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,

    /// Read angles (boundary conditions, theta) in degrees instead of radians.
    #[arg(long, global = true)]
    pub degrees: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iwasawa parameters (alpha, r, theta) of the matrix [[a, b], [c, d]].
    #[command(allow_negative_numbers = true)]
    Decompose { a: f64, b: f64, c: f64, d: f64 },
    /// Transfer matrix, or the Pruefer angle trace as (x, phi) columns.
    Transfer,
    /// Eigenvalues in an energy window.
    Eigs,
    /// Theta / r / alpha verdicts for one eigenvalue.
    Dichotomy,
    /// Hit statistics of an eigenvalue under random parameters.
    Montecarlo,
    /// Place sites at which the shear parameter is invisible; writes a config.
    Degenerate,
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
