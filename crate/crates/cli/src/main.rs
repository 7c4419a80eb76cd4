//! `scarforge`: batch pipeline for scar-mask generation, masked diffusion
//! synthesis, registration and evaluation.
//!
//! Exit codes: 0 success, 1 configuration or validation error, 2 partial
//! data error (some cases failed or were unmatched).

mod cmd;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::PipelineConfig;

#[derive(Debug, Parser)]
#[command(name = "scarforge", version, about = "Myocardial scar synthesis and evaluation pipeline")]
struct Cli {
    /// JSON pipeline configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for per-case parallelism.
    #[arg(long, global = true, env = "SCARFORGE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic cardiac phantom (image, myocardium, AHA labels).
    Phantom(cmd::phantom::Args),
    /// Reorient, resample or normalise a NRRD volume.
    Convert(cmd::convert::Args),
    /// Generate atlas-guided scar masks.
    Genmask(cmd::genmask::Args),
    /// Inpaint a scar region with the masked diffusion sampler.
    Synth(cmd::synth::Args),
    /// Score predicted scar masks against ground truth.
    Eval(cmd::eval::Args),
    /// Register a moving image to a fixed one.
    Register(cmd::register::Args),
}

/// A command failure; every variant exits with status 1.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Core(scarforge_core::Error),
    /// A post-run integrity check did not hold.
    Audit(String),
}

impl From<scarforge_core::Error> for Failure {
    fn from(e: scarforge_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Audit(m) => write!(f, "audit failed: {m}"),
        }
    }
}

/// How a command that ran to the end went.
#[derive(Debug, PartialEq, Eq)]
pub enum Status {
    Complete,
    Partial,
}

fn run(cli: Cli) -> Result<Status, Failure> {
    let mut config = PipelineConfig::load(cli.config.as_deref())?;
    if cli.threads.is_some() {
        config.threads = cli.threads;
    }
    if let Some(n) = config.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Phantom(a) => cmd::phantom::run(a, config),
        Command::Convert(a) => cmd::convert::run(a, config),
        Command::Genmask(a) => cmd::genmask::run(a, config),
        Command::Synth(a) => cmd::synth::run(a, config),
        Command::Eval(a) => cmd::eval::run(a, config),
        Command::Register(a) => cmd::register::run(a, config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(Status::Complete) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("scarforge: {e}");
            ExitCode::from(1)
        }
    }
}
