//! `iswap-vqa`: batch driver for variational state preparation, tomography,
//! CHSH sweeps, gate fitting and chevron calibration.
//!
//! Exit codes: 0 success, 1 I/O failure writing artifacts, 2 configuration or
//! input error, 3 numerical failure (divergence, ill-conditioning).

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Command, Overrides};
use iswap_vqa_core::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Input(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::IllConditioned { .. } | CoreError::NonFinite(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "iswap-vqa", version, about = "Variational Bell/GHZ preparation with imperfect iSwap-like entanglers")]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// JSON run configuration; every field is optional.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Root seed; overrides the config's `seed`.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory for artifacts.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Sample this many shots per setting instead of exact probabilities.
    #[arg(long, global = true, value_name = "N", conflicts_with = "exact")]
    shots: Option<u64>,

    /// Use exact probabilities.
    #[arg(long, global = true)]
    exact: bool,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Train the ansatz towards a Bell or GHZ state.
    Optimize,
    /// Reconstruct a density matrix from tomography records.
    Tomo,
    /// Sweep CHSH correlators over the measurement angle.
    Chsh,
    /// Fit the iSwap-like gate family to a target process.
    FitGate,
    /// Compute the calibration chevron and its maximum-transfer point.
    Chevron,
}

fn write_artifacts(dir: &Path, files: &[(String, String)]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    for (name, contents) in files {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let command = match cli.command {
        Sub::Optimize => Command::Optimize,
        Sub::Tomo => Command::Tomo,
        Sub::Chsh => Command::Chsh,
        Sub::FitGate => Command::FitGate,
        Sub::Chevron => Command::Chevron,
    };
    if cli.shots == Some(0) {
        return Err(CliError::Config("--shots must be at least 1".into()));
    }
    let mut cfg = config::load_config(cli.config.as_deref())?;
    cfg.apply(command, &Overrides { seed: cli.seed, shots: cli.shots, exact: cli.exact })?;
    cfg.validate(command)?;
    let base_dir = cli.config.as_deref().and_then(Path::parent).unwrap_or(Path::new("."));

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;

    let outcome = pool.install(|| match command {
        Command::Optimize => commands::optimize(&cfg, base_dir),
        Command::Tomo => commands::tomo(&cfg, base_dir),
        Command::Chsh => commands::chsh(&cfg, base_dir),
        Command::FitGate => commands::fit_gate(&cfg, base_dir),
        Command::Chevron => commands::chevron(&cfg, base_dir),
    })?;
    write_artifacts(&cli.out, &outcome.files)?;
    match outcome.failure {
        Some(msg) => Err(CliError::Numerical(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("iswap-vqa {}: {e}", match cli.command {
                Sub::Optimize => "optimize",
                Sub::Tomo => "tomo",
                Sub::Chsh => "chsh",
                Sub::FitGate => "fit-gate",
                Sub::Chevron => "chevron",
            });
            ExitCode::from(e.exit_code())
        }
    }
}
