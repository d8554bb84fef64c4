//! Command-line front end for the distributed spectrum estimator.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use graphspec::config::LoadedConfig;
use graphspec::runner;

#[derive(Parser)]
#[command(name = "graphspec", version, about = "Distributed graph-spectrum estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to a JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured base seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct OutArgs {
    /// Directory for emitted CSV/JSON artifacts (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run both stages end to end and write traces plus a report.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Print reference coefficients and spectrum without running the pipeline.
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sweep perturbation magnitudes and write per-trial records.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Check the configured matrices and parameters without running.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Pretty-print a report; a closed stdout (e.g. piped to `head`) ends the
/// process quietly instead of panicking.
fn print_json<T: Serialize>(value: &T) -> graphspec::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    if let Err(e) = writeln!(std::io::stdout().lock(), "{text}") {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        return Err(e.into());
    }
    Ok(())
}

fn run(cli: Cli) -> graphspec::Result<()> {
    match cli.command {
        Command::Run { common, out } => {
            let loaded = LoadedConfig::load(&common.config)?;
            let report = runner::cmd_run(&loaded, &out.out, common.seed)?;
            print_json(&report)?;
        }
        Command::Oracle { common } => {
            let loaded = LoadedConfig::load(&common.config)?;
            let report = runner::cmd_oracle(&loaded, common.seed)?;
            print_json(&report)?;
        }
        Command::Sweep { common, out } => {
            let loaded = LoadedConfig::load(&common.config)?;
            let report = runner::cmd_sweep(&loaded, &out.out, common.seed)?;
            print_json(&report)?;
        }
        Command::Validate { common } => {
            let loaded = LoadedConfig::load(&common.config)?;
            let report = runner::cmd_validate(&loaded, common.seed)?;
            print_json(&report)?;
            if !report.problems.is_empty() {
                return Err(graphspec::Error::Config(format!(
                    "validation found {} problem(s)",
                    report.problems.len()
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
