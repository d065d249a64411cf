//! `rapidstab`: feedback synthesis and closed-loop simulation toolkit.
//!
//! Subcommands take a single JSON config document and write machine-readable
//! artifacts into the configured output directory. Exit codes:
//!   0 success
//!   1 usage, I/O, malformed input, or violated structural assumption
//!   2 moment hypothesis violation (ill-posed synthesis for this mu)
//!   3 near-singular basis family
//!   4 quadrature under-resolution
//!   5 closed-loop instability guard

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use rapidstab_core::Error as CoreError;

#[derive(Parser)]
#[command(name = "rapidstab", version, about = "Rapid-stabilization synthesis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize feedback gains and the transformation; write gains.json,
    /// transform.bin and report.json.
    Synth {
        #[arg(long)]
        config: PathBuf,
    },
    /// Integrate the closed loop from a gains file; write trace.csv and
    /// summary.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Reconstruct the kernels k12 and k22 on a grid; write kernel.csv and
    /// kernel_report.json.
    Kernel {
        #[arg(long)]
        config: PathBuf,
    },
    /// Matrix pole shifting for an (A, B, lambda) triple.
    #[command(name = "finite-dim")]
    FiniteDim {
        #[arg(long)]
        config: PathBuf,
    },
    /// Exact-transport benchmark with the explicit boundary feedback.
    #[command(name = "saint-venant")]
    SaintVenant {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (path, runner): (&PathBuf, fn(&RunConfig) -> anyhow::Result<()>) = match &cli.command {
        Command::Synth { config } => (config, commands::cmd_synth),
        Command::Simulate { config } => (config, commands::cmd_simulate),
        Command::Kernel { config } => (config, commands::cmd_kernel),
        Command::FiniteDim { config } => (config, commands::cmd_finite_dim),
        Command::SaintVenant { config } => (config, commands::cmd_saint_venant),
    };
    let cfg = match RunConfig::load(path) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("rapidstab: {err:#}");
            return ExitCode::from(1);
        }
    };
    match runner(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("rapidstab: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::HypothesisViolation { .. } | CoreError::DegenerateSlopes { .. } => 2,
                CoreError::NearSingularBasis { .. } => 3,
                CoreError::QuadratureUnderresolved { .. } => 4,
                CoreError::Unstable { .. } => 5,
                _ => 1,
            };
        }
    }
    1
}
