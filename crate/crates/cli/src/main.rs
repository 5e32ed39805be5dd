//! `wfe`: command-line driver for the wfe-core studies.
//!
//! Exit codes: 0 success, 1 invalid configuration, 2 runtime failure,
//! 3 partial output (written with a `.partial` suffix).

mod commands;
mod parse;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wfe_core::csv_out::RunStamp;
use wfe_core::Error;

use commands::*;

#[derive(Parser, Debug)]
#[command(name = "wfe", version, about = "Wright-Fisher model with efficiency: simulations and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Master seed; every replicate stream derives from it.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Output file (a directory for `sweep`). Defaults to `<subcommand>.csv`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true, env = "WFE_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// One discrete trajectory, one row per generation.
    SimulateDiscrete(SimulateDiscrete),
    /// A diffusion path, or absorption times over many replicates.
    SimulateDiffusion(SimulateDiffusion),
    /// Inefficient-type fixation probability over a grid of y.
    Fixation(Fixation),
    /// Expected absorption time over a grid of x.
    FixationTime(FixationTime),
    /// An ASEG graph or its vertex-count path.
    Aseg(Aseg),
    /// Monte Carlo moment-duality report.
    DualityCheck(DualityCheck),
    /// Leftover resource law under rule M2 against the chain's stationary law.
    Leftover(Leftover),
    /// Probability that one generation's size is close to N_x.
    Concentration(Concentration),
    /// Sibuya pmf, optionally against sampled vertex counts.
    Sibuya(Sibuya),
    /// Cross-product sweep from a TOML file; one CSV per cell plus a manifest.
    Sweep(sweep::SweepArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SimulateDiscrete(_) => "simulate-discrete",
            Command::SimulateDiffusion(_) => "simulate-diffusion",
            Command::Fixation(_) => "fixation",
            Command::FixationTime(_) => "fixation-time",
            Command::Aseg(_) => "aseg",
            Command::DualityCheck(_) => "duality-check",
            Command::Leftover(_) => "leftover",
            Command::Concentration(_) => "concentration",
            Command::Sibuya(_) => "sibuya",
            Command::Sweep(_) => "sweep",
        }
    }
}

/// Files produced by one run, held in memory until the run ends.
pub struct Output {
    pub files: Vec<(PathBuf, Vec<u8>)>,
    pub summary: String,
    pub partial: bool,
}

#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::QuadratureFailure { .. } | Error::Io(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Runs one non-sweep command and returns its files.
pub fn execute(command: &Command, seed: u64, out: &Path) -> Result<Output, Failure> {
    let stamp = RunStamp::new(&format!("{command:?}"), seed);
    match command {
        Command::SimulateDiscrete(a) => a.run(&stamp, out),
        Command::SimulateDiffusion(a) => a.run(&stamp, out),
        Command::Fixation(a) => a.run(&stamp, out),
        Command::FixationTime(a) => a.run(&stamp, out),
        Command::Aseg(a) => a.run(&stamp, out),
        Command::DualityCheck(a) => a.run(&stamp, out),
        Command::Leftover(a) => a.run(&stamp, out),
        Command::Concentration(a) => a.run(&stamp, out),
        Command::Sibuya(a) => a.run(&stamp, out),
        Command::Sweep(_) => Err(Failure::Invalid("sweeps cannot be nested".into())),
    }
}

pub fn partial_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Writes every file, adding `.partial` when the run was incomplete.
pub fn write_output(output: &Output) -> Result<Vec<PathBuf>, Failure> {
    let mut written = Vec::with_capacity(output.files.len());
    for (path, bytes) in &output.files {
        let path = if output.partial { partial_path(path) } else { path.clone() };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&path, bytes)?;
        written.push(path);
    }
    Ok(written)
}

fn run(cli: Cli) -> Result<bool, Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Invalid("--threads: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| match &cli.command {
            Command::Sweep(_) => PathBuf::from("sweep"),
            c => PathBuf::from(format!("{}.csv", c.name())),
        });
    if let Command::Sweep(args) = &cli.command {
        return sweep::run_sweep(args, cli.seed, &out);
    }
    let output = execute(&cli.command, cli.seed, &out)?;
    let written = write_output(&output)?;
    let names: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
    println!("{}: {} -> {}", cli.command.name(), output.summary, names.join(", "));
    Ok(!output.partial)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
