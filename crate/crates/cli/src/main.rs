//! `omori-lab`: announcement-response analysis from the command line.
//!
//! Exit codes: 0 success, 1 validation failure, 2 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

mod commands;
mod files;

#[derive(Debug, Parser)]
#[command(name = "omori-lab", version, about = "Market response to scheduled announcements")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory; files in it are replaced, never appended to.
    #[arg(long, global = true, env = "OMORI_LAB_OUT", default_value = "omori-out")]
    out: PathBuf,

    /// Master seed for shuffles, groupings and simulations.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Treat forward-filled rate gaps as errors.
    #[arg(long, global = true)]
    strict: bool,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check input files against their schemas and invariants.
    Validate(commands::validate::Args),
    /// Speculation, surprise and daily volatility response per event.
    Daily(commands::daily::Args),
    /// Omori fits of intraday volatility events around each announcement.
    Intraday(commands::intraday::Args),
    /// Write synthetic input files with known ground truth.
    Simulate(commands::simulate::Args),
    /// Run the estimator calibration suite.
    Calibrate(commands::calibrate::Args),
}

/// Settings shared by every command.
pub struct Context {
    pub out: PathBuf,
    pub seed: u64,
    pub seed_given: bool,
    pub strict: bool,
}

pub const DEFAULT_SEED: u64 = 42;

/// What a command reports besides hard errors.
pub enum Outcome {
    Success,
    Failed,
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let ctx = Context {
        out: cli.out,
        seed: cli.seed.unwrap_or(DEFAULT_SEED),
        seed_given: cli.seed.is_some(),
        strict: cli.strict,
    };
    match cli.command {
        Command::Validate(a) => commands::validate::run(&ctx, a),
        Command::Daily(a) => commands::daily::run(&ctx, a),
        Command::Intraday(a) => commands::intraday::run(&ctx, a),
        Command::Simulate(a) => commands::simulate::run(&ctx, a),
        Command::Calibrate(a) => commands::calibrate::run(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(|| run(cli)),
            Err(e) => Err(e.into()),
        },
        None => run(cli),
    };
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
