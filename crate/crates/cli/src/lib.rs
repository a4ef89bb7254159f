//! Command-line front end: reads density specifications, runs the
//! computations and renders deterministic JSON or CSV.

pub mod args;
mod commands;
mod output;

pub use args::{Cli, Command, CommonArgs, Format};
pub use output::{Cell, Payload, Table};

use qmk::QmkError;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] QmkError),
}

impl CliError {
    /// 1 for parse/usage/IO problems, 2 for infeasible or ill-posed input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(QmkError::Parse(_)) => 1,
            CliError::Core(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

/// Everything that determines the output; hashed into every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub inputs: Vec<InputRecord>,
    pub hbar: Vec<f64>,
    pub cutoff: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub format: Format,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub dim: Option<usize>,
}

impl RunConfig {
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}

pub(crate) fn read_input(path: &Path) -> CliResult<(String, InputRecord)> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    let record = InputRecord { path: path.display().to_string(), sha256: format!("{:x}", Sha256::digest(text.as_bytes())) };
    Ok((text, record))
}

/// Result of a run: the rendered artifact and whether every solve converged.
#[derive(Debug)]
pub struct RunOutcome {
    pub rendered: String,
    pub converged: bool,
    pub warnings: Vec<String>,
}

pub fn run(command: &Command) -> CliResult<RunOutcome> {
    let common = command.common();
    let format = common.format.unwrap_or_else(|| command.default_format());
    let mut inputs = Vec::new();
    for path in [&common.input, &common.input2].into_iter().flatten() {
        inputs.push(read_input(path)?);
    }
    let (a, b, dim) = match command {
        Command::BipartiteSweep { a, b, .. } => (a.clone(), b.clone(), None),
        Command::Spectrum { dim, .. } => (vec![], vec![], Some(*dim)),
        _ => (vec![], vec![], None),
    };
    let config = RunConfig {
        command: command.name().to_string(),
        inputs: inputs.iter().map(|(_, r)| r.clone()).collect(),
        hbar: common.hbar.clone(),
        cutoff: common.cutoff,
        tol: common.tol,
        max_iter: common.max_iter,
        format,
        a,
        b,
        dim,
    };
    let texts: Vec<String> = inputs.into_iter().map(|(t, _)| t).collect();
    let payload = commands::execute(command, &texts)?;
    let rendered = output::render(&payload, &config, format);
    Ok(RunOutcome { rendered, converged: payload.converged, warnings: payload.warnings })
}

pub fn write_output(outcome: &RunOutcome, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, &outcome.rendered).map_err(|source| CliError::Write { path: p.to_path_buf(), source }),
        None => {
            print!("{}", outcome.rendered);
            Ok(())
        }
    }
}
