use std::path::PathBuf;

use thiserror::Error;

use crate::model::ComponentId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller broke an operation's precondition (mismatched degrees etc).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("root finder did not converge after {iterations} iterations (worst residual {worst:e})")]
    RootsNotConverged {
        iterations: usize,
        worst: f64,
        residuals: Vec<f64>,
    },

    #[error("building table for {component} failed at sample a={sample}: {source}")]
    TableBuild {
        component: ComponentId,
        sample: usize,
        #[source]
        source: Box<Error>,
    },

    /// Stored or computed data broke a documented invariant.
    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("{}:{line}: {msg}", path.display())]
    Format { path: PathBuf, line: usize, msg: String },

    #[error("measured response is zero at omega={0}")]
    ZeroMeasurement(f64),

    #[error("missing table for component {0}")]
    MissingTable(ComponentId),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::RootsNotConverged { .. } => true,
            Error::TableBuild { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
