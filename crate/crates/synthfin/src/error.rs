//! Crate-wide error type.
//!
//! Variants split into two broad classes mirrored by the CLI exit codes:
//! input/validation problems (exit 2) and computation failures (exit 1).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input at line {line}: {msg}")]
    MalformedInput { line: usize, msg: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("training diverged at epoch {epoch}: {msg}")]
    Divergence { epoch: usize, msg: String },

    /// Optimizer failed to converge; carries the last iterate and the
    /// objective trace so callers can inspect what happened.
    #[error("fit failed: {msg} (last iterate {last:?})")]
    FitFailure {
        msg: String,
        last: Vec<f64>,
        trace: Vec<f64>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for input/validation problems,
    /// 1 for failures arising during computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MalformedInput { .. }
            | Error::Domain(_)
            | Error::InsufficientData { .. }
            | Error::Contract(_)
            | Error::ShapeMismatch { .. }
            | Error::Config(_)
            | Error::Io { .. }
            | Error::Json(_) => 2,
            Error::DegenerateSeries(_)
            | Error::Singular(_)
            | Error::Infeasible(_)
            | Error::Divergence { .. }
            | Error::FitFailure { .. } => 1,
        }
    }

    /// Short machine-readable kind tag used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MalformedInput { .. } => "malformed_input",
            Error::Domain(_) => "domain",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::DegenerateSeries(_) => "degenerate_series",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::Contract(_) => "contract",
            Error::Singular(_) => "singular",
            Error::Infeasible(_) => "infeasible",
            Error::Divergence { .. } => "divergence",
            Error::FitFailure { .. } => "fit_failure",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
