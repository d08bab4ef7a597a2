use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("panel not found: {0}")]
    PanelNotFound(PathBuf),

    #[error("missing cell: unit {unit} has no observation for period {period}")]
    MissingCell { unit: String, period: String },

    #[error("duplicate cell: unit {unit}, period {period} appears more than once")]
    DuplicateCell { unit: String, period: String },

    #[error("non-numeric value {value:?} in column {column} (line {line})")]
    NonNumeric {
        column: String,
        value: String,
        line: usize,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("horizon {horizon} leaves {remaining} training periods (need at least 2)")]
    HorizonTooLarge { horizon: usize, remaining: usize },

    #[error("accuracy {0} outside [0.5, 1)")]
    AccuracyOutOfRange(f64),

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("unknown unit {0:?}")]
    UnknownUnit(String),

    #[error("posterior precision is not positive definite (group {group})")]
    SingularPrecision { group: usize },

    #[error("unit {unit} has zero mass over all candidate groups")]
    AllZeroMass { unit: usize },

    #[error("chain is empty")]
    EmptyChain,

    #[error("partition lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("design matrix is collinear")]
    CollinearDesign,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
