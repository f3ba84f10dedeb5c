//! Command-line front end: path simulation, term-structure pricing, the
//! no-arbitrage gap, martingale verification, curve calibration and the
//! G-heat solver. Every command is deterministic given its configuration.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Payoff, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    Verification(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<robust_term::Error> for CliError {
    fn from(e: robust_term::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<robust_term::CurveError> for CliError {
    fn from(e: robust_term::CurveError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("i/o: {e}"))
    }
}

#[derive(Parser)]
#[command(name = "robust-term", version, about = "Short-rate term structures under volatility uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON run configuration; flags override its fields
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed; every path and scenario stream derives from it
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (standard output when absent)
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Volatility band as `lo,hi`
    #[arg(long, global = true, value_name = "LO,HI", value_parser = parse_band)]
    band: Option<robust_term::VolBand>,
    /// Mean-reversion speed
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Monte Carlo paths per scenario
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Time steps per path
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Forward-curve file (CSV `T,f` or JSON)
    #[arg(long, global = true, value_name = "PATH")]
    curve: Option<PathBuf>,
    /// Bond maturity, or the horizon for `simulate` and `gheat`
    #[arg(long, global = true)]
    maturity: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths of sigma, B, <B>, lambda, r and D as CSV
    Simulate,
    /// Term structure `T,price_lower,price_robust,price_upper` at t = 0
    Price,
    /// Monte Carlo upper/lower bond prices and the gap between priors (JSON)
    Gap,
    /// Martingale check of discounted robust bond prices (CSV)
    Verify {
        /// Simulate under the unadjusted drift; the check should then fail
        #[arg(long)]
        unshifted: bool,
    },
    /// Fit the mean-reversion level to a forward curve and report the round trip
    Calibrate,
    /// Solve the G-heat equation for a terminal payoff (CSV `t,x,u`)
    Gheat {
        #[arg(long, value_enum)]
        phi: Option<Payoff>,
        /// Store every n-th time level in the output
        #[arg(long)]
        save_every: Option<usize>,
    },
}

fn parse_band(s: &str) -> Result<robust_term::VolBand, String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected `lo,hi`, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("band lower bound: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("band upper bound: {e}"))?;
    robust_term::VolBand::new(lo, hi).map_err(|e| e.to_string())
}

fn resolve(common: &Common, command: &Command) -> Result<RunConfig, CliError> {
    let base = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut flags = RunConfig {
        band: common.band,
        alpha: common.alpha,
        curve: common.curve.clone(),
        maturity: common.maturity,
        paths: common.paths,
        steps: common.steps,
        seed: common.seed,
        out: common.out.clone(),
        ..Default::default()
    };
    match command {
        Command::Verify { unshifted: true } => flags.dynamics = Some(robust_term::Dynamics::Original),
        Command::Gheat { phi, save_every } => {
            flags.phi = *phi;
            flags.save_every = *save_every;
        }
        _ => {}
    }
    Ok(base.overlay(flags))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli.common, &cli.command)?;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Price => commands::price(&cfg),
        Command::Gap => commands::gap(&cfg),
        Command::Verify { .. } => commands::verify(&cfg),
        Command::Calibrate => commands::calibrate(&cfg),
        Command::Gheat { .. } => commands::gheat(&cfg),
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
