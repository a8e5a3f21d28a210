use std::path::PathBuf;

use iecc_core::{ClusterError, CodecError, IecError, MetricsError};
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const INPUT: i32 = 3;
    pub const MALFORMED: i32 = 4;
    pub const DATA: i32 = 5;
    pub const WRITE: i32 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {reason}")]
    Input { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Malformed { path: PathBuf, source: CodecError },
    #[error("{0}")]
    Data(String),
    #[error("cannot write {path}: {reason}")]
    Write { path: PathBuf, reason: String },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Input { .. } => exit::INPUT,
            CliError::Malformed { .. } => exit::MALFORMED,
            CliError::Data(_) => exit::DATA,
            CliError::Write { .. } => exit::WRITE,
            CliError::Internal(_) => exit::INTERNAL,
        }
    }

    pub(crate) fn input(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        CliError::Input {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    pub(crate) fn write(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        CliError::Write {
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        match e {
            CodecError::InvalidK(_) => CliError::Usage(e.to_string()),
            CodecError::Degenerate { .. }
            | CodecError::DimensionMismatch { .. }
            | CodecError::Cluster(ClusterError::Degenerate { .. }) => CliError::Data(e.to_string()),
            CodecError::Cluster(ClusterError::InvalidConfig(msg)) => CliError::Usage(msg),
            other if other.is_malformed() => CliError::Malformed {
                path: PathBuf::new(),
                source: other,
            },
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<IecError> for CliError {
    fn from(e: IecError) -> Self {
        match e {
            IecError::InvalidThreshold(_) => CliError::Usage(e.to_string()),
            IecError::Encode(inner) => inner.into(),
            IecError::EmptyStream => CliError::Data(e.to_string()),
            IecError::ShapeMismatch(_) | IecError::ShapeDrift { .. } => CliError::Data(e.to_string()),
        }
    }
}

impl From<ClusterError> for CliError {
    fn from(e: ClusterError) -> Self {
        CodecError::Cluster(e).into()
    }
}
