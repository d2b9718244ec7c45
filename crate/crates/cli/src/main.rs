use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use qaction_cli::{run_with_threads, CliError, Command, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Amplitude,
    GroundState,
    Fit,
    FitFamily,
    Qpotential,
    Instanton,
    Poincare,
    Hydrogen,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Amplitude => Command::Amplitude,
            Cmd::GroundState => Command::GroundState,
            Cmd::Fit => Command::Fit,
            Cmd::FitFamily => Command::FitFamily,
            Cmd::Qpotential => Command::Qpotential,
            Cmd::Instanton => Command::Instanton,
            Cmd::Poincare => Command::Poincare,
            Cmd::Hydrogen => Command::Hydrogen,
        }
    }
}

/// Quantum-action analyses: Euclidean amplitudes, action fits, quantum
/// potentials, instantons, Poincaré sections and hydrogen sectors.
#[derive(Debug, Parser)]
#[command(name = "qaction", version)]
struct Args {
    command: Cmd,
    /// Run configuration (TOML with dotted section keys).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; overrides `run.threads`.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; overrides `run.out` (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed for `poincare`; overrides `chaos.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qaction: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: &Args) -> Result<Vec<PathBuf>, CliError> {
    let command = Command::from(args.command);
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        if command != Command::Poincare {
            return Err(CliError::Config("--seed only applies to poincare".into()));
        }
        config.chaos.seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.run.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    run_with_threads(command, &config, &out, args.threads.or(config.run.threads))
}
