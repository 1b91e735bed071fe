//! `aimd-arena`: runs AIMD network, protocol-game and replicator experiments described by
//! a strict JSON config and writes the results as CSV.
//!
//! ```text
//! aimd-arena <command> --config <path> [--out <path>]
//! ```
//!
//! `command` is one of the config commands (`simulate`, `fixed-point`, `stability`,
//! `payoff-matrix`, `equilibrium`, `dominance`, `replicator`), `run` (take the command
//! from the config) or `sweep` (repeat the config's command over a `sweep` grid).
//!
//! Exit codes: 0 success, 1 invalid input (the offending field is named), 2 the model
//! reports an inconsistency.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

pub use commands::{execute, num, sweep, Report, Table};
pub use config::{Command, ExperimentConfig, TopologyDef};
pub use error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Action {
    Run,
    Sweep,
    Simulate,
    FixedPoint,
    Stability,
    PayoffMatrix,
    Equilibrium,
    Dominance,
    Replicator,
}

impl Action {
    fn command(self) -> Option<Command> {
        Some(match self {
            Self::Run | Self::Sweep => return None,
            Self::Simulate => Command::Simulate,
            Self::FixedPoint => Command::FixedPoint,
            Self::Stability => Command::Stability,
            Self::PayoffMatrix => Command::PayoffMatrix,
            Self::Equilibrium => Command::Equilibrium,
            Self::Dominance => Command::Dominance,
            Self::Replicator => Command::Replicator,
        })
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "aimd-arena",
    version,
    about = "AIMD fluid-model and protocol-game experiments"
)]
pub struct Cli {
    pub action: Action,
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// CSV destination; overrides `output_path` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Loads, validates and executes a config; writes the CSV if a destination is known.
pub fn run_cli(cli: &Cli) -> Result<Vec<String>, CliError> {
    let config = ExperimentConfig::load(&cli.config)?;
    if let Some(requested) = cli.action.command() {
        if requested != config.command {
            return Err(CliError::invalid(
                "command",
                format!(
                    "config describes `{}` but `{}` was requested",
                    config.command.name(),
                    requested.name()
                ),
            ));
        }
    }
    let sweeping = cli.action == Action::Sweep;
    config.check_fields(sweeping)?;
    let report = if sweeping {
        sweep(&config)?
    } else {
        execute(&config)?
    };
    let mut lines = report.summary;
    if let Some(path) = cli.out.as_ref().or(config.output_path.as_ref()) {
        write_csv(path, &report.table)?;
        lines.push(format!(
            "wrote {} rows to {}",
            report.table.rows.len(),
            path.display()
        ));
    }
    Ok(lines)
}

pub fn write_csv(path: &Path, table: &Table) -> Result<(), CliError> {
    let fail = |e: &dyn std::fmt::Display| CliError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut writer = csv::Writer::from_path(path).map_err(|e| fail(&e))?;
    writer.write_record(&table.header).map_err(|e| fail(&e))?;
    for row in &table.rows {
        writer.write_record(row).map_err(|e| fail(&e))?;
    }
    writer.flush().map_err(|e| fail(&e))
}

/// Parses arguments, runs, prints, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation errors; --help and --version are not errors
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run_cli(&cli) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
