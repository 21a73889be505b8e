//! Crate-wide error type and the exit-code categories used by the CLI.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite values encountered in {context}")]
    NonFinite { context: String },

    #[error("grid mismatch: expected {expected_nx}x{expected_ny}, got {got_nx}x{got_ny}")]
    GridMismatch {
        expected_nx: usize,
        expected_ny: usize,
        got_nx: usize,
        got_ny: usize,
    },

    #[error("boundary samples on edge {edge} have length {got}, expected {expected}")]
    BoundaryLength {
        edge: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("reference field has zero norm")]
    ZeroNormReference,

    #[error("dataset is empty or all-zero")]
    DegenerateDataset,

    #[error("solver failed to converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("CFL violation: dt = {dt:.3e} exceeds stable limit {limit:.3e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("guidance instability at step {step} (last finite energy {last_energy:.3e})")]
    GuidanceInstability { step: usize, last_energy: f64 },

    #[error("training diverged at iteration {iteration}: loss {loss:.3e} vs initial {initial:.3e}")]
    TrainingDiverged {
        iteration: usize,
        loss: f64,
        initial: f64,
    },

    #[error("file format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse failure category; the CLI maps each to a distinct exit code so
/// that scripts (e.g. stability sweeps) can tell instability from misuse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    NumericInstability,
    Io,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidParameter(_) | Error::CflViolation { .. } => ErrorCategory::Config,
            Error::GridMismatch { .. }
            | Error::BoundaryLength { .. }
            | Error::ZeroNormReference
            | Error::DegenerateDataset
            | Error::Format(_) => ErrorCategory::Data,
            Error::NonFinite { .. }
            | Error::SolverDiverged { .. }
            | Error::GuidanceInstability { .. }
            | Error::TrainingDiverged { .. } => ErrorCategory::NumericInstability,
            Error::Io(_) | Error::Json(_) => ErrorCategory::Io,
        }
    }

    pub(crate) fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
        }
    }
}
