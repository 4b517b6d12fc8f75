//! `levy-spde`: simulate stable noise, solve the mild equations and run the
//! verification suites from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}{message}", if *line > 0 { format!("line {line}: ") } else { String::new() })]
    Config { line: usize, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] levy_spde::error::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use levy_spde::error::Error as E;
        match self {
            CliError::Model(E::Diverged { .. } | E::TooManyJumps { .. } | E::Degenerate(_)) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "levy-spde", version, about = "Stable noise simulation, mild SPDE solutions and verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file, sectioned key = value text or JSON.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    replicates: Option<usize>,
    /// Worker threads for replicate farms (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Run the verification suites under their built-in perturbation.
    #[arg(long, global = true)]
    negative_control: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate jump sets and the noise of the configured boxes.
    Noise,
    /// Linear mild solution on the solver grid.
    Linear,
    /// Picard iteration for the truncated (or drifted) nonlinear equation.
    Solve,
    /// Kernel values and the I_alpha, J_p integrals.
    Kernels,
    /// Run a verification suite, or `all`.
    Verify { suite: String },
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.run.out = out;
    }
    if let Some(n) = cli.replicates {
        if n == 0 {
            return Err(CliError::Usage("--replicates must be at least 1".into()));
        }
        cfg.run.replicates = n;
        cfg.verify.replicates = Some(n);
    }
    if cli.negative_control {
        cfg.verify.negative_control = true;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Noise => commands::noise(&cfg),
        Command::Linear => commands::linear(&cfg),
        Command::Solve => commands::solve(&cfg),
        Command::Kernels => commands::kernels(&cfg),
        Command::Verify { suite } => commands::verify(&cfg, &suite),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
