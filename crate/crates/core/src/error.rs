use thiserror::Error;

use crate::model::AdmissibilityReport;

/// Errors raised by synthesis, analysis and estimation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("inadmissible covariance: {0}")]
    Admissibility(AdmissibilityReport),

    #[error("octave {requested} infeasible for this sample size; deepest feasible octave is {deepest}")]
    OctaveInfeasible { requested: u32, deepest: u32 },

    #[error("nonpositive eigenvalue {value:e} at octave j={octave}, q={index}")]
    NonPositiveEigenvalue { octave: u32, index: usize, value: f64 },

    #[error("symmetric eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("matrix is not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("replication nu={nu} rep={rep} seed={seed} failed: {source}")]
    Replication {
        nu: usize,
        rep: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse error classes, used by the CLI to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Invalid(_) | Error::OctaveInfeasible { .. } | Error::Parse { .. } | Error::Json(_) => {
                ErrorClass::Validation
            }
            Error::Admissibility(_)
            | Error::NonPositiveEigenvalue { .. }
            | Error::NoConvergence { .. }
            | Error::NotPsd(_)
            | Error::Factorization(_) => ErrorClass::Numerical,
            Error::Replication { source, .. } => source.class(),
            Error::Io { .. } => ErrorClass::Io,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
