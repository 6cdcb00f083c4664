use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("relative error undefined: reference vector is zero")]
    ZeroReference,

    #[error("GMRES did not converge after {iterations} iterations (relative residual {residual:.3e}, tolerance {tol:.1e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("rejection sampling exceeded {attempts} attempts placing disk {disk} of {count} (radius range [{r_min}, {r_max}])")]
    RejectionCapExceeded {
        attempts: usize,
        disk: usize,
        count: usize,
        r_min: f64,
        r_max: f64,
    },

    #[error("degenerate field: {0}")]
    Degenerate(String),

    #[error("channel {channel} has zero variance")]
    ZeroVariance { channel: usize },

    #[error("training diverged at epoch {epoch}: loss is {loss} (learning rate too high?)")]
    Diverged { epoch: usize, loss: f64 },

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub fn in_sample(self, index: usize) -> Self {
        Error::Sample {
            index,
            source: Box::new(self),
        }
    }

    pub fn in_round(self, round: usize) -> Self {
        Error::Round {
            round,
            source: Box::new(self),
        }
    }

    /// Short machine-readable category used by the command-line front end.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::ZeroReference => "zero_reference",
            Error::NotConverged { .. } => "not_converged",
            Error::RejectionCapExceeded { .. } => "rejection_cap",
            Error::Degenerate(_) => "degenerate",
            Error::ZeroVariance { .. } => "zero_variance",
            Error::Diverged { .. } => "diverged",
            Error::Sample { source, .. } | Error::Round { source, .. } => source.kind(),
            Error::Format { .. } => "format",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
