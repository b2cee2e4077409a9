//! Command-line driver: configuration parsing, dispatch and CSV output.

pub mod commands;
pub mod config;
pub mod csv;

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{execute, selftest, Command, RunError};
use crate::config::{help_config, parse_config, ConfigError, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_SELFTEST: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "leo-irs", version, about = "Cooperative IRS satellite link simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Cmd>,
    /// Configuration file (flat `key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// CSV output path; standard output when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Master seed, overriding `run.seed`.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Override a configuration key; repeatable, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// List every configuration key with its unit and default.
    #[arg(long)]
    pub help_config: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Cmd {
    /// Rate versus transmit power.
    PowerSweep,
    /// Rate versus total IRS element count.
    ElementSweep,
    /// Rate versus the variable named by `sweep.variable`.
    Sweep,
    /// Rate over time under the training and tracking protocol.
    Tracking,
    /// Gain and rate per scheme at one time instant.
    Snapshot,
    /// Small-instance consistency checks.
    Selftest,
}

/// Load the file (if any), then `--set` overrides, then dedicated flags.
pub fn load_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut rc = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
                key: path.display().to_string(),
                line: None,
                message: format!("cannot read config: {e}"),
            })?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    for s in &cli.set {
        rc.set_override(s)?;
    }
    if let Some(seed) = cli.seed {
        rc.set("run.seed", &seed.to_string(), None)?;
    }
    if let Some(out) = &cli.out {
        rc.out = Some(out.display().to_string());
    }
    Ok(rc)
}

/// Run with explicit arguments and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if cli.help_config {
        print!("{}", help_config());
        return EXIT_OK;
    }
    let Some(cmd) = cli.command else {
        eprintln!("error: a subcommand is required (see --help)");
        return EXIT_VALIDATION;
    };
    let rc = match load_config(&cli) {
        Ok(rc) => rc,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_VALIDATION;
        }
    };
    let command = match cmd {
        Cmd::PowerSweep => Command::PowerSweep,
        Cmd::ElementSweep => Command::ElementSweep,
        Cmd::Sweep => Command::Sweep,
        Cmd::Tracking => Command::Tracking,
        Cmd::Snapshot => Command::Snapshot,
        Cmd::Selftest => {
            let results = selftest();
            let mut failed = false;
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                failed |= !r.passed;
            }
            return if failed { EXIT_SELFTEST } else { EXIT_OK };
        }
    };
    let rows = match execute(command, &rc) {
        Ok(rows) => rows,
        Err(RunError::Config(e)) => {
            eprintln!("config error: {e}");
            return EXIT_VALIDATION;
        }
        Err(RunError::Runtime(e)) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    let written = match &rc.out {
        Some(path) => csv::emit_csv(&rows, path.as_ref()),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            csv::write_csv(&rows, &mut lock).and_then(|_| lock.flush())
        }
    };
    match written {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: cannot write output: {e}");
            EXIT_RUNTIME
        }
    }
}
