//! Command-line front end: configuration ingestion, the validate / certify /
//! simulate / sweep / reproduce commands, and data-file emission.
//!
//! Exit codes: 0 on success, 1 when the system fails a requirement (singular
//! fast block, unstable block, infeasible certificate, incompatible
//! schedule), 2 on malformed input or bad usage.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};


#[derive(Parser)]
#[command(
    name = "hybrid-dwell",
    version,
    about = "Dwell-time stability certificates and exact simulation for \
             two-time-scale switched and impulsive linear systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration: structure, fast-block invertibility, and
    /// block stability.
    Validate {
        /// Path to the TOML run configuration.
        config: PathBuf,
    },
    /// Compute dwell-time certificates for one or more epsilon values.
    Certify {
        /// Path to the TOML run configuration.
        config: PathBuf,
        /// Comma-separated epsilon values; defaults to the config's list,
        /// then to the system's own epsilon.
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        /// Keep the fast weight inside the b3 coupling norm.
        #[arg(long)]
        strict_b3: bool,
        /// Output directory for certificate records.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate under a periodic or explicit schedule and classify the
    /// outcome.
    Simulate {
        /// Path to the TOML run configuration.
        config: PathBuf,
        /// Dwell time of a periodic schedule, in seconds.
        #[arg(long)]
        tau: Option<f64>,
        /// Path to a TOML schedule file (alternative to --tau).
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Output directory for trajectory data.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify across an epsilon list and report the asymptotic ratios.
    Sweep {
        /// Path to the TOML run configuration.
        config: PathBuf,
        /// Comma-separated epsilon values.
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        /// Output directory for the sweep table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a bundled worked example end to end and write a report bundle.
    Reproduce {
        /// Example id: 1 or 2.
        #[arg(value_parser = clap::value_parser!(u8).range(1..=2))]
        id: u8,
        /// Output directory for the report bundle.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config } => commands::cmd_validate(&config),
        Command::Certify { config, eps, strict_b3, out } => {
            commands::cmd_certify(&config, &eps, strict_b3, out)
        }
        Command::Simulate { config, tau, schedule, out } => {
            commands::cmd_simulate(&config, tau, schedule.as_deref(), out)
        }
        Command::Sweep { config, eps, out } => commands::cmd_sweep(&config, &eps, out),
        Command::Reproduce { id, out } => commands::cmd_reproduce(id, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.code())
        }
    }
}
