mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Invariant densities, spectral bounds and Hardy-space norms of the random
/// Gauss-Renyi continued fraction map.
#[derive(Debug, Parser)]
#[command(name = "gauss-renyi", version)]
pub struct Cli {
    /// Output directory; every file the run writes goes here.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Invariant density of the random transfer operator.
    Density(DensityArgs),
    /// Orbit histogram of the random map.
    Simulate(SimulateArgs),
    /// Essential spectral radius bounds on C^k.
    Bounds(BoundsArgs),
    /// Run acceptance suites.
    Verify(VerifyArgs),
    /// Norm table of the Hardy-space decomposition.
    Hardy(HardyArgs),
    /// Markov modification of the operator.
    Modify(ModifyArgs),
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[arg(long)]
    pub p: f64,
    /// Collocation degree.
    #[arg(long, default_value_t = 32)]
    pub degree: usize,
    /// Explicit branches before the tail correction.
    #[arg(long, default_value_t = 64)]
    pub tail_n: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = gauss_renyi::dynamics::DEFAULT_BURN_IN)]
    pub burn_in: usize,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 4)]
    pub k_max: u32,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// closed-forms, spectral, monte-carlo, bounds, modification, hardy or all.
    #[arg(long, default_value = "all")]
    pub suite: String,
}

#[derive(Debug, Args)]
pub struct HardyArgs {
    #[arg(long, default_value_t = 20)]
    pub n_max: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitChoice {
    Banach,
    Hardy,
    Both,
}

#[derive(Debug, Args)]
pub struct ModifyArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long, value_enum, default_value_t = SplitChoice::Both)]
    pub split: SplitChoice,
    #[arg(long, default_value_t = 32)]
    pub degree: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(commands::EXIT_USAGE),
            };
        }
    };
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
