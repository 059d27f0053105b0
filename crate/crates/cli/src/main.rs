//! `splinelc` command-line driver.

mod attack;
mod config;
mod lc;
mod output;
mod points;
mod slice;
mod train;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "splinelc", version, about = "Spline-partition geometry of small piecewise-linear networks")]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Shared {
    /// Global seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output location; overrides the config file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train with LC, robustness and slice probes at checkpoints.
    Train(train::TrainArgs),
    /// Local complexity of a weights file around sets of points.
    Lc(lc::LcArgs),
    /// Exact linear regions of a 2D slice, as JSON and SVG.
    Slice(slice::SliceArgs),
    /// PGD robust accuracy over a list of budgets.
    Attack(attack::AttackArgs),
    /// Built-in validation battery.
    Validate(validate::ValidateArgs),
}

/// Errors the user can fix by changing inputs (exit code 2).
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

/// A check ran and reported failure (exit code 1, no extra message).
#[derive(Debug)]
pub struct Failed;

impl std::fmt::Display for Failed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("one or more checks failed")
    }
}

impl std::error::Error for Failed {}

fn exit_code(err: &anyhow::Error) -> u8 {
    use splinelc::Error as E;
    for cause in err.chain() {
        if cause.is::<InputError>() || cause.is::<toml::de::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::UnsupportedActivation { .. } => 3,
                E::InvalidConfig { .. } | E::Parse { .. } | E::DimensionMismatch { .. } | E::File { .. } => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.shared.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Train(a) => train::run(&cli.shared, a),
        Command::Lc(a) => lc::run(&cli.shared, a),
        Command::Slice(a) => slice::run(&cli.shared, a),
        Command::Attack(a) => attack::run(&cli.shared, a),
        Command::Validate(a) => validate::run(&cli.shared, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !e.is::<Failed>() {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
