//! Driver behind the `qaction` binary: one command per analysis pipeline,
//! each writing headed, byte-reproducible artifacts into an output
//! directory.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod commands;
pub mod config;
pub mod header;

pub use commands::{run, Command};
pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] quantum_action::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use quantum_action::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(E::DegenerateFit { .. } | E::DegenerateTable { .. }) => 4,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Runs `command` on a worker pool of `threads` workers (rayon's default
/// when `None`).
pub fn run_with_threads(
    command: Command,
    config: &RunConfig,
    out: &Path,
    threads: Option<usize>,
) -> Result<Vec<PathBuf>, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("threads must be ≥ 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run(command, config, out))
}
