//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by audit computations, data ingestion, and configuration
/// handling.
#[derive(Debug, Error)]
pub enum AuditError {
    #[error("design matrix is rank deficient (singular value ratio {ratio:.3e} below {tolerance:.1e})")]
    RankDeficient { ratio: f64, tolerance: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("duplicate column label `{label}`")]
    DuplicateLabel { label: String },

    #[error("observation {index} has leverage {leverage} at or above 1; HC2/HC3 undefined")]
    LeverageAtOne { index: usize, leverage: f64 },

    #[error("classical variance of coefficient {index} is zero while the sandwich variance is not")]
    ZeroClassicalVariance { index: usize },

    #[error("covariance matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    IndefiniteCovariance { min_eigenvalue: f64 },

    #[error("negative variance {value:.3e} beyond cancellation tolerance {tolerance:.3e}")]
    NegativeVarianceBeyondTolerance { value: f64, tolerance: f64 },

    #[error("GLM did not converge after {iterations} iterations (deviance {deviance:.6e})")]
    NotConverged { iterations: usize, deviance: f64 },

    #[error("response value {value} at row {row} is invalid for family {family}")]
    InvalidResponseForFamily {
        family: &'static str,
        row: usize,
        value: f64,
    },

    #[error("information matrix is singular")]
    SingularInformation,

    #[error("invalid restricted/extended model pair: {reason}")]
    InvalidModelPair { reason: String },

    #[error("group `{group}` has {got} observations, need at least {needed}")]
    InsufficientObservations {
        group: String,
        needed: usize,
        got: usize,
    },

    #[error("non-positive response {value} at row {row}; log specification requires positive responses")]
    NonpositiveResponseForLog { row: usize, value: f64 },

    #[error("assumed effect equals the TOST threshold; required sample size is unbounded")]
    EffectAtThreshold,

    #[error("configuration field `{field}` is missing")]
    MissingField { field: String },

    #[error("configuration field `{field}` out of range: {detail}")]
    InvalidRange { field: String, detail: String },

    #[error("configuration is not valid JSON: {0}")]
    ConfigSyntax(String),

    #[error("column `{name}` not found in dataset header")]
    MissingColumn { name: String },

    #[error("column `{name}` is bound to a role but is not numeric")]
    NonNumericColumn { name: String },

    #[error("cannot parse field at row {row}, column `{col}`: {detail}")]
    ParseError {
        row: usize,
        col: String,
        detail: String,
    },

    #[error("protected column must be 0/1; found {value} at row {row}")]
    NonBinaryProtected { row: usize, value: f64 },

    #[error("non-positive response {value} at row {row}")]
    NonpositiveResponse { row: usize, value: f64 },

    #[error("experiment grid must be nonempty")]
    NonemptyGridRequired,

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, AuditError>;
