use std::path::PathBuf;

use crate::linalg::SolverError;
use crate::runtime::TaskError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid horizon: {0}")]
    Horizon(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("node {0} has no neighbours inside the horizon")]
    IsolatedNode(usize),

    #[error("zero-length bond between nodes {0} and {1}")]
    ZeroLengthBond(usize, usize),

    #[error("bond {i}-{j} collapsed: deformed bond length is zero")]
    Collision { i: usize, j: usize },

    #[error("non-finite force detected at step {step}")]
    NonFinite { step: usize },

    #[error("linear solver failed: {0}")]
    Solver(#[from] SolverError),

    #[error("Newton iteration failed after {iterations} iterations ({reason}); residual trace: {trace:?}")]
    Newton {
        iterations: usize,
        reason: &'static str,
        trace: Vec<f64>,
    },

    #[error("convergence study: {0}")]
    Convergence(String),

    #[error(transparent)]
    Deck(#[from] crate::deck::DeckError),

    #[error(transparent)]
    Task(#[from] TaskError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Collision { .. }
                | Error::NonFinite { .. }
                | Error::Solver(_)
                | Error::Newton { .. }
                | Error::IsolatedNode(_)
                | Error::Convergence(_)
                | Error::Task(_)
        )
    }
}
