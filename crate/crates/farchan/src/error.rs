use farchan_core::laplace::LaplaceError;
use farchan_core::{ChannelError, GeometryError, SimError};
use thiserror::Error;

/// Process exit codes. `2` is left to clap for usage errors.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const INVARIANT: i32 = 4;
    pub const CONVERGENCE: i32 = 5;
    pub const TOLERANCE: i32 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    Invariant(String),
    #[error("not converged: {0}")]
    Convergence(String),
    #[error("max absolute error {max_error:.6e} exceeds tolerance {tol:.6e}")]
    Tolerance { max_error: f64, tol: f64 },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Csv(_) | CliError::Other(_) => exit::IO,
            CliError::Parse(_) => exit::PARSE,
            CliError::Invariant(_) => exit::INVARIANT,
            CliError::Convergence(_) => exit::CONVERGENCE,
            CliError::Tolerance { .. } => exit::TOLERANCE,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io("i/o error", e)
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Invariant(e.to_string())
    }
}

impl From<LaplaceError> for CliError {
    fn from(e: LaplaceError) -> Self {
        match e {
            LaplaceError::NotConverged { .. } | LaplaceError::Overflow { .. } => CliError::Convergence(e.to_string()),
            _ => CliError::Invariant(e.to_string()),
        }
    }
}

impl From<ChannelError> for CliError {
    fn from(e: ChannelError) -> Self {
        match e {
            ChannelError::Laplace(inner) => inner.into(),
            ChannelError::NotConverged { .. } | ChannelError::SeriesDiverges { .. } | ChannelError::Singular { .. } => {
                CliError::Convergence(e.to_string())
            }
            _ => CliError::Invariant(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Channel(inner) => inner.into(),
            SimError::InvalidConfig(_) => CliError::Invariant(e.to_string()),
        }
    }
}

impl From<rayon::ThreadPoolBuildError> for CliError {
    fn from(e: rayon::ThreadPoolBuildError) -> Self {
        CliError::Other(format!("cannot start worker pool: {e}"))
    }
}
