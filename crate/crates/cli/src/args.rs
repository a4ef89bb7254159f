use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "qmk", version, about = "Quantum Monge-Kantorovich transport toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args, Default)]
pub struct CommonArgs {
    /// First density (JSON).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Second density (JSON).
    #[arg(long)]
    pub input2: Option<PathBuf>,
    /// ℏ; overrides the value in the input files. Comma-separated lists are
    /// accepted by the sweep commands.
    #[arg(long, value_delimiter = ',')]
    pub hbar: Vec<f64>,
    /// Fock cutoff per axis; overrides the automatic choice.
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Combined residual tolerance of the SDP solver.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// MK_ℏ² between two densities.
    Distance(CommonArgs),
    /// Optimal Kantorovich pair (A, B).
    Dual(CommonArgs),
    /// Optimality certificate for the solver output.
    Certify(CommonArgs),
    /// Transport-structure residuals and the kernel criterion.
    Structure(CommonArgs),
    /// Closed-form two-point instances against the solver.
    BipartiteSweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        a: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        b: Vec<f64>,
    },
    /// MK_ℏ² of a Töplitz density with itself against 2dℏ.
    ToeplitzCheck(CommonArgs),
    /// Classical transport between two coherent mixtures and the semiclassical bound.
    Classical(CommonArgs),
    /// Labelled spectrum of the truncated cost operator.
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 1)]
        dim: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Distance(_) => "distance",
            Command::Dual(_) => "dual",
            Command::Certify(_) => "certify",
            Command::Structure(_) => "structure",
            Command::BipartiteSweep { .. } => "bipartite-sweep",
            Command::ToeplitzCheck(_) => "toeplitz-check",
            Command::Classical(_) => "classical",
            Command::Spectrum { .. } => "spectrum",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Distance(c)
            | Command::Dual(c)
            | Command::Certify(c)
            | Command::Structure(c)
            | Command::ToeplitzCheck(c)
            | Command::Classical(c) => c,
            Command::BipartiteSweep { common, .. } | Command::Spectrum { common, .. } => common,
        }
    }

    pub fn default_format(&self) -> Format {
        match self {
            Command::BipartiteSweep { .. } | Command::ToeplitzCheck(_) | Command::Spectrum { .. } => Format::Csv,
            _ => Format::Json,
        }
    }
}
