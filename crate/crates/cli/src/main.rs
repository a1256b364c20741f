//! `mfgfem`: experiment driver for the stationary mean field game solver.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input error,
//! 3 solver nonconvergence.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Verification(String),
    NonConvergence(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Verification(_) => 1,
            Self::Input(_) => 2,
            Self::NonConvergence(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Self::Input(m) | Self::Verification(m) | Self::NonConvergence(m) => m,
        }
    }
}

impl From<mfg_core::Error> for CliError {
    fn from(e: mfg_core::Error) -> Self {
        use mfg_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Config(_) | E::Parse { .. } | E::Geometry(_) | E::Io(_) => Self::Input(msg),
            E::NonConvergence { .. } | E::Solver(_) | E::Numeric(_) => Self::NonConvergence(msg),
            E::Invariant(_) => Self::Verification(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Input(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "mfgfem", version, about = "Stabilized P1 finite elements for stationary mean field games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Run configuration (flat TOML); defaults are used when omitted.
    config: Option<PathBuf>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Permit `stabilization = "none"`.
    #[arg(long)]
    allow_unstabilized: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mesh quality and angle conditions at the finest configured level.
    CheckMesh(Common),
    /// Solve the coupled system at the finest configured level.
    Solve(Common),
    /// Solve on every configured level and tabulate convergence rates.
    Convergence(Common),
    /// Run the stabilization, monotonicity and Hamiltonian property checks.
    Verify(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::CheckMesh(_) => "check-mesh",
            Self::Solve(_) => "solve",
            Self::Convergence(_) => "convergence",
            Self::Verify(_) => "verify",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Self::CheckMesh(c) | Self::Solve(c) | Self::Convergence(c) | Self::Verify(c) => c,
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let common = cli.command.common();
    let (mut cfg, base_dir) = RunConfig::load(common.config.as_deref())?;
    if let Some(c) = &cfg.command {
        let c = c.replace('_', "-");
        if c != cli.command.name() {
            return Err(CliError::Input(format!(
                "config is for command {c:?}, not {:?}",
                cli.command.name()
            )));
        }
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    let ctx = commands::Context::new(cfg, base_dir, common.allow_unstabilized)?;
    match cli.command {
        Command::CheckMesh(_) => commands::check_mesh(&ctx),
        Command::Solve(_) => commands::solve(&ctx),
        Command::Convergence(_) => commands::convergence(&ctx),
        Command::Verify(_) => commands::verify(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mfgfem: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
