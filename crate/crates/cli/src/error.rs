use std::path::PathBuf;

use maxent_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input files and arguments.
    #[error("{0}")]
    Input(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}", solver_message(.0))]
    Solver(CoreError),

    #[error("selection failed: {0}")]
    Selection(String),

    #[error("{0}")]
    Internal(CoreError),
}

fn solver_message(e: &CoreError) -> String {
    match e {
        CoreError::InconsistentSystem { .. }
        | CoreError::InfeasibleMoments { .. }
        | CoreError::ZeroMarginal { .. } => format!("infeasible constraints: {e}"),
        _ => format!("solver failed: {e}"),
    }
}

impl CliError {
    /// 0 ok, 2 input, 3 solver, 4 selection; anything else is 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Read { .. } => 2,
            CliError::Solver(_) => 3,
            CliError::Selection(_) => 4,
            CliError::Write { .. } | CliError::Internal(_) => 1,
        }
    }

    pub fn read(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Read {
            path: path.into(),
            source,
        }
    }

    pub fn write(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Write {
            path: path.into(),
            source,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidDistribution(_)
            | CoreError::InvalidCounts(_)
            | CoreError::InvalidSpace(_)
            | CoreError::DimensionMismatch { .. }
            | CoreError::InvalidCoefficients(_)
            | CoreError::InvalidConfig(_)
            | CoreError::InvalidHypergraph(_) => CliError::Input(e.to_string()),
            CoreError::InconsistentSystem { .. }
            | CoreError::InfeasibleMoments { .. }
            | CoreError::ZeroMarginal { .. }
            | CoreError::NoConvergence { .. }
            | CoreError::SingularJacobian { .. } => CliError::Solver(e),
            CoreError::NoSolvableCandidate => CliError::Selection(e.to_string()),
            CoreError::SupportViolation { .. }
            | CoreError::RankDeficient { .. }
            | CoreError::RejectionExhausted { .. }
            | CoreError::NotNested => CliError::Internal(e),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
