//! `cw` — simulate, estimate, plan, weight, verify, and calibrate the
//! multi-group Curie-Weiss voting model from the command line.
//!
//! Exit codes: 0 success, 2 an estimate came back inconclusive, 3 a
//! validation or verification check failed, 4 bad input (files, flags,
//! config).

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    /// malformed input: files, flags, config (exit 4)
    Input(String),
    /// a validation or verification check failed (exit 3)
    Validation(String),
    /// library error, mapped by kind
    Lib(curie_weiss::Error),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        use curie_weiss::Error as E;
        match self {
            CliError::Input(_) => 4,
            CliError::Validation(_) => 3,
            CliError::Lib(e) => match e {
                E::InvalidInput(_) | E::OutOfRange { .. } | E::OutOfDomain { .. } => 4,
                E::SeparationViolated { .. }
                | E::ConstantsUncalibrated(_)
                | E::DegenerateBound(_)
                | E::QuadratureFailure { .. } => 3,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "{m}"),
            CliError::Validation(m) => write!(f, "{m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<curie_weiss::Error> for CliError {
    fn from(e: curie_weiss::Error) -> Self {
        CliError::Lib(e)
    }
}

#[derive(Parser)]
#[command(
    name = "cw",
    about = "Multi-group Curie-Weiss voting model: simulation, coupling estimation, and council weights",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration (strict schema, unknown keys rejected)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed; every output is deterministic given the seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (default: current directory)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// High-temperature regime boundary (0 < b1 < 1)
    #[arg(long, global = true)]
    b1: Option<f64>,

    /// Low-temperature regime boundary (b2 > 1)
    #[arg(long, global = true)]
    b2: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a sample of group margins and write it as CSV
    Simulate {
        /// number of observations
        #[arg(long)]
        n: Option<usize>,
        /// also materialize raw spin vectors
        #[arg(long)]
        spins: bool,
    },
    /// Estimate couplings (and weights) from a margins or spins CSV
    Estimate {
        /// input CSV; defaults to the config's `data` entry
        #[arg(long)]
        data: Option<PathBuf>,
        /// additionally compute the exact-moment MLE per group
        #[arg(long)]
        exact_mle: bool,
        /// two-sided confidence level (default 0.95)
        #[arg(long)]
        level: Option<f64>,
    },
    /// Smallest sample size meeting a misidentification bound
    Plan {
        /// upper bound on the worst-case misidentification probability
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Optimal, estimated, and baseline council weights with deficits
    Weights {
        /// estimate weights from this sample instead of/alongside known couplings
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the verification profile (oracle agreement, envelopes, Monte Carlo)
    Verify {
        /// heavier profile: adds coverage, CLT, and tail-rate studies
        #[arg(long)]
        full: bool,
    },
    /// Calibrate the approximation-error constants and write them to JSON
    Calibrate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let cfg = config::load_config(cli.config.as_deref())?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    if !out_dir.exists() {
        std::fs::create_dir_all(&out_dir)
            .map_err(|e| CliError::input(format!("cannot create {}: {e}", out_dir.display())))?;
    }
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let intervals = config::resolve_intervals(cli.b1, cli.b2, &cfg)?;

    match cli.command {
        Command::Simulate { n, spins } => commands::simulate(&cfg, &out_dir, seed, n, spins),
        Command::Estimate {
            data,
            exact_mle,
            level,
        } => commands::estimate(&cfg, &intervals, &out_dir, data, exact_mle, level),
        Command::Plan { epsilon } => commands::plan(&cfg, &intervals, &out_dir, epsilon),
        Command::Weights { data } => commands::weights(&cfg, &intervals, &out_dir, data),
        Command::Verify { full } => commands::verify(&cfg, &intervals, &out_dir, seed, full),
        Command::Calibrate => commands::calibrate(&cfg, &intervals, &out_dir),
    }
}
