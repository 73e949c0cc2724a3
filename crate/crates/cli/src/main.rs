mod analyze;
mod simulate;
mod theory;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wmw_cluster::simulation::Method;
use wmw_cluster::Error;

pub const DEFAULT_SEED: u64 = 20240101;

#[derive(Parser)]
#[command(
    name = "wmw",
    version,
    about = "WMW relative effect for clustered data with informative cluster size"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate and test the effect on a CSV dataset (cluster,group,value).
    Analyze(AnalyzeArgs),
    /// Run a simulation scenario and write PREFIX.csv and PREFIX.json.
    Simulate(SimulateArgs),
    /// Closed-form effects of the two-size informative design.
    Theory(TheoryArgs),
}

#[derive(clap::Args)]
pub struct AnalyzeArgs {
    pub input: PathBuf,
    #[arg(long, default_value = "tilde-t", value_parser = parse_method)]
    pub method: Method,
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    pub alpha: f64,
    /// Resamples for hat (default 10000) and hoffman (default 1000).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub resamples: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(clap::Args)]
pub struct SimulateArgs {
    pub config: PathBuf,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,
    /// Output prefix; `.csv` and `.json` are appended.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated methods; all when omitted.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(2..))]
    pub hat_resamples: u64,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(2..))]
    pub hoffman_resamples: u64,
}

#[derive(clap::Args)]
pub struct TheoryArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub c1: u32,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub c2: u32,
    /// Also run the brute-force mixture oracle with this many draws.
    #[arg(long)]
    pub oracle_draws: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if a > 0.0 && a < 1.0 {
        Ok(a)
    } else {
        Err(format!("alpha must lie in (0, 1), got {a}"))
    }
}

/// A failed command: exit code, message, and any JSON still worth printing.
pub struct Failure {
    pub code: u8,
    pub message: String,
    pub partial: Option<String>,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
            partial: None,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
            partial: None,
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoComparisons => 4,
        Error::NegativeVariance { .. }
        | Error::DegenerateVariance(_)
        | Error::DegenerateResample
        | Error::InsufficientDraws { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Analyze(a) => analyze::run(&a),
        Command::Simulate(a) => simulate::run(&a),
        Command::Theory(a) => theory::run(&a),
    };
    match outcome {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            if let Some(json) = f.partial {
                print!("{json}");
            }
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
