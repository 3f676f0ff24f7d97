use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: length {len_in} is shorter than kernel {kernel}")]
    DegenerateInput { len_in: u64, kernel: u64 },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("device '{device}' has no anchor for {what}")]
    MissingAnchor { device: String, what: String },

    #[error("device '{device}' does not support mixed precision training")]
    UnsupportedPrecision { device: String },

    #[error("unknown device '{0}'")]
    UnknownDevice(String),

    #[error("malformed manifest row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("manifest is missing required column '{0}'")]
    MissingColumn(String),

    #[error("cannot split {speakers} speakers into {clients} clients")]
    TooFewSpeakers { speakers: usize, clients: usize },

    #[error("cannot sample {per_round} clients per round from {total}")]
    InvalidSampleSize { per_round: usize, total: usize },

    #[error("aggregation needs at least one client update")]
    EmptyUpdateSet,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid speed ratio: slow time {slow} s is faster than fast time {fast} s")]
    InvalidRatio { slow: f64, fast: f64 },

    #[error("peak {peak_gb:.2} GB does not fit the {budget_gb:.2} GB budget of '{device}'")]
    OutOfMemory { device: String, peak_gb: f64, budget_gb: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse grouping used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Data,
    Infeasible,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::DegenerateInput { .. }
            | Error::InvalidSpec(_)
            | Error::UnknownDevice(_)
            | Error::InvalidSampleSize { .. }
            | Error::InvalidRatio { .. }
            | Error::Config(_) => ErrorClass::Validation,
            Error::MalformedRow { .. }
            | Error::MissingColumn(_)
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::EmptyUpdateSet
            | Error::DimensionMismatch { .. } => ErrorClass::Data,
            Error::MissingAnchor { .. }
            | Error::UnsupportedPrecision { .. }
            | Error::TooFewSpeakers { .. }
            | Error::OutOfMemory { .. } => ErrorClass::Infeasible,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
