use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numeric,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid signal spec: {0}")]
    InvalidSignal(String),

    #[error("invalid sample buffer: {0}")]
    InvalidBuffer(String),

    #[error("invalid scd config: {0}")]
    InvalidScdConfig(String),

    #[error("window has {got} samples, estimator expects {expected}")]
    WindowLength { expected: usize, got: usize },

    #[error("cyclic frequency offset {0} bins is not an even bin offset inside the window")]
    AlphaOffGrid(i64),

    #[error("cyclic frequency {0} bins has no valid spectral support")]
    EmptySupport(i64),

    #[error("cyclic frequency {0} bins is not on the estimator's alpha grid")]
    AlphaNotInGrid(i64),

    #[error("invalid distribution parameters: {0}")]
    InvalidParams(String),

    #[error("probability {0} is outside (0, 1)")]
    ProbabilityOutOfRange(f64),

    #[error("non-finite input value {0}")]
    NonFinite(f64),

    #[error("need at least {needed} samples to fit, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),

    #[error("detector config: {0}")]
    Detector(String),

    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed file: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } | Error::Format { .. } => ErrorClass::Io,
            Error::TooFewSamples { .. }
            | Error::DegenerateSamples(_)
            | Error::NonFinite(_)
            | Error::EmptySupport(_) => ErrorClass::Numeric,
            _ => ErrorClass::Config,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.to_string(),
        }
    }
}
