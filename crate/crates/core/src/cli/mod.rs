//! Batch front door: JSON configs in, JSON/CSV reports out.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a
//! computation breaks down, 2 on invalid configuration or unwritable output.

pub mod config;
pub mod output;
pub mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::{load, EosScanConfig, ExtendConfig, ProbeConfig, SolveConfig, SurgeryConfig, VerifyConfig};
use output::OutDir;
use pipeline::{
    cmd_eos_scan, cmd_extend, cmd_probe_clarke, cmd_solve, cmd_surgery, cmd_verify, write_eos_scan, write_solve,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("output error: {0}")]
    Io(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "centerforge",
    version,
    about = "Centre-unstable manifolds by graph transform, edge-of-stability scans and boundary surgery"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration; the command default is used when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Safe radii, block bounds and C^1 distances of the cutoff extension.
    Extend,
    /// Graph-transform solve with contraction, tangency and invariance checks.
    Solve,
    /// Step-size scan of gradient descent around a minimiser.
    EosScan,
    /// Boundary modification on the arc benchmark and its five checks.
    Surgery,
    /// Aggregated invariant suites.
    Verify,
    /// Sampled Clarke derivative of a test function.
    ProbeClarke,
}

/// Runs one subcommand; `Ok(false)` means a check failed.
pub fn run(cli: &Cli) -> Result<bool, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        // a pool may already exist when called repeatedly in one process
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("global thread pool already initialised");
        }
    }
    let path = cli.config.as_deref();
    match cli.command {
        Command::Extend => {
            let mut cfg: ExtendConfig = load(path)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let out = OutDir::create(&cli.out)?;
            let rep = cmd_extend(&cfg)?;
            out.write_json("extend_report.json", &rep)?;
            Ok(rep.pass)
        }
        Command::Solve => {
            let mut cfg: SolveConfig = load(path)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let out = OutDir::create(&cli.out)?;
            let o = cmd_solve(&cfg)?;
            write_solve(&out, &o)?;
            Ok(o.report.pass)
        }
        Command::EosScan => {
            let cfg: EosScanConfig = load(path)?;
            let out = OutDir::create(&cli.out)?;
            let (rep, rows) = cmd_eos_scan(&cfg)?;
            write_eos_scan(&out, &rep, &rows)?;
            Ok(true)
        }
        Command::Surgery => {
            let mut cfg: SurgeryConfig = load(path)?;
            if let Some(s) = cli.seed {
                cfg.arc.seed = s;
            }
            let out = OutDir::create(&cli.out)?;
            let run = cmd_surgery(&cfg)?;
            out.write_json("surgery_report.json", &run)?;
            Ok(run.report.pass)
        }
        Command::Verify => {
            let mut cfg: VerifyConfig = load(path)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let out = OutDir::create(&cli.out)?;
            let rep = cmd_verify(&cfg)?;
            out.write_json("verify_report.json", &rep)?;
            for f in &rep.failures {
                eprintln!("failed suite: {f:?}");
            }
            Ok(rep.pass)
        }
        Command::ProbeClarke => {
            let mut cfg: ProbeConfig = load(path)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let out = OutDir::create(&cli.out)?;
            let rep = cmd_probe_clarke(&cfg)?;
            out.write_json("probe_report.json", &rep)?;
            Ok(true)
        }
    }
}

/// `run` mapped to a process exit code, with errors reported on stderr.
pub fn main_exit(cli: &Cli) -> ExitCode {
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("checks failed; see the report in {}", cli.out.display());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
