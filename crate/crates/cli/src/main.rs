// SPDX-License-Identifier: Apache-2.0

//! `spinsqueeze`: batch runner for the spin-squeezing models.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 numerical failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use commands::Command;
use config::ConfigFile;
use output::{sha256_hex, write_all, Format, RunInfo};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<spinsqueeze_core::Error> for CliError {
    fn from(e: spinsqueeze_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "spinsqueeze",
    version,
    about = "Spin-squeezing simulations driven by a TOML config"
)]
struct Cli {
    /// TOML file; each subcommand reads the table named after it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let cfg = ConfigFile::parse(&text)?;
    let jobs = match cli.jobs {
        Some(0) => return Err(CliError::Config("--jobs must be >= 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;

    let start = Instant::now();
    let out = pool.install(|| cli.command.run(&cfg))?;
    let info = RunInfo {
        subcommand: cli.command.name(),
        config_path: &path,
        config_hash: &sha256_hex(text.as_bytes()),
        format: cli.format,
        jobs,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    for p in write_all(&cli.out, &out, &info)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spinsqueeze: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
