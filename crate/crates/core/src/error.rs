use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point {point:?} lies outside the box [-{r}, {r}]^d")]
    OutsideBox { point: [f64; 3], r: f64 },

    #[error("tensor field is not positive definite at {point:?} (smallest eigenvalue {min_eigenvalue})")]
    NotPositiveDefinite { point: [f64; 3], min_eigenvalue: f64 },

    #[error("scalar field is not finite at {point:?}")]
    NonFiniteField { point: [f64; 3] },

    #[error("lattice of {required} nodes exceeds the configured budget of {budget} nodes ({what})")]
    OverBudget {
        what: &'static str,
        required: u64,
        budget: u64,
    },

    #[error("unsatisfiable constraint `{constraint}`: {detail}")]
    Unsatisfiable {
        constraint: &'static str,
        detail: String,
    },

    #[error("untangling changed a geodesic's length from {before} to {after} (path {path})")]
    LengthIncrease { path: usize, before: u64, after: u64 },

    #[error("segments {first} and {second} still intersect after {attempts} subdivision attempts")]
    SegmentsIntersect {
        first: usize,
        second: usize,
        attempts: usize,
    },

    #[error("vertices {from} and {to} are not connected")]
    Disconnected { from: usize, to: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{what} mismatch: expected {expected}, found {found}")]
    Mismatch {
        what: &'static str,
        expected: String,
        found: String,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
