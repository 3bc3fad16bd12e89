//! `qwalk`: batch runner for the quantum-walk laboratory.
//!
//! Exit codes: 0 ok, 1 verification failure, 2 bad arguments, 3 resource cap.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qwalk::{CoinSequence, Error};

use config::{ExperimentConfig, WalkKind};

#[derive(Parser)]
#[command(name = "qwalk", version, about = "Substitution-coin quantum walk experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Clone, Copy, Debug)]
enum Command {
    /// Probability profiles a(n, l) and time averages over the L grid
    Simulate,
    /// Moments over the L grid and transport-exponent slopes
    Exponents,
    /// Run every consistency check; exit 1 if any fails
    Verify,
    /// Moment lower-bound certificate for each p
    Certify,
    /// Transfer-matrix norm scans and resolvent scans near z = i
    TransferScan,
    /// Both sides of the damped Parseval identity
    Parseval,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Exponents => "exponents",
            Command::Verify => "verify",
            Command::Certify => "certify",
            Command::TransferScan => "transfer-scan",
            Command::Parseval => "parseval",
        }
    }
}

/// Flags override the fields of the JSON config.
#[derive(Args, Debug, Default)]
pub struct Overrides {
    /// JSON config file; missing fields take their defaults
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub walk: Option<WalkKind>,
    /// Coin angle for symbol 1, in (0, pi/2)
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Coin angle for symbol 0, in (0, pi/2)
    #[arg(long, global = true)]
    pub phi: Option<f64>,
    /// thue-morse | fibonacci | periodic:q | constant
    #[arg(long, global = true)]
    pub sequence: Option<CoinSequence>,
    #[arg(long, global = true)]
    pub offset: Option<usize>,
    /// Moment orders, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    #[arg(long = "L-start", global = true)]
    pub l_start: Option<f64>,
    #[arg(long = "L-ratio", global = true)]
    pub l_ratio: Option<f64>,
    #[arg(long = "L-count", global = true)]
    pub l_count: Option<usize>,
    /// Steps stored by simulate
    #[arg(long = "l-max", global = true)]
    pub l_max: Option<usize>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Scale the coin at this site by 1.5 before the coin checks of verify
    #[arg(long, global = true, hide = true, allow_hyphen_values = true)]
    pub corrupt_coin: Option<i64>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ResourceCap { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match ExperimentConfig::load(cli.overrides.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    cfg.apply(&cli.overrides);
    cfg.command = Some(cli.command.name().to_string());
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(exit_code(&e));
    }
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let cache = std::env::var_os("QW_CACHE_DIR").filter(|v| !v.is_empty()).map(PathBuf::from);
    let result = match cli.command {
        Command::Simulate => commands::simulate(&cfg, cache),
        Command::Exponents => commands::exponents(&cfg, cache),
        Command::Verify => commands::verify(&cfg, cache),
        Command::Certify => commands::certify(&cfg, cache),
        Command::TransferScan => commands::transfer_scan(&cfg, cache),
        Command::Parseval => commands::parseval(&cfg, cache),
    };
    match result {
        Ok(commands::Status::Ok) => ExitCode::SUCCESS,
        Ok(commands::Status::Failed(names)) => {
            eprintln!("verification failed: {}", names.join(", "));
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
