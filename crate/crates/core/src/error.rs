//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Result`]. Variants are
//! grouped by the stage that raises them so a caller (for example the CLI)
//! can map them onto coarse exit categories: configuration problems, data
//! problems, and numerical failures.

use chrono::{DateTime, Utc};

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failures this crate can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // --- configuration -----------------------------------------------------
    /// A configuration value is out of its documented range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A single-character anomaly code outside `A..=L`.
    #[error("unknown anomaly type code {0:?}")]
    UnknownTypeCode(char),

    // --- data ---------------------------------------------------------------
    /// An operation needs more observations than the series provides.
    #[error("{context}: need at least {needed} observations, got {got}")]
    InsufficientData {
        context: &'static str,
        needed: usize,
        got: usize,
    },

    /// The series (or a derived series) carries no usable variation.
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    /// A value that must be strictly positive is not, and no earlier
    /// positive value exists to substitute for it.
    #[error("no positive value precedes the nonpositive value at {timestamp}")]
    LeadingNonpositive { timestamp: DateTime<Utc> },

    /// Timestamps are not strictly increasing where the operation needs them
    /// to be, or two inputs disagree about the time axis.
    #[error("timestamp alignment: {0}")]
    Alignment(String),

    /// The data violates the transform a model was trained under (for
    /// example a nonpositive value reaching a log transform).
    #[error("transform mismatch: {0}")]
    Transform(String),

    /// A covariate row needed for a regression step is absent or unusable.
    #[error("missing covariate: {0}")]
    MissingCovariate(String),

    /// A covariate lookup falls outside the observed covariate span.
    #[error("covariate extrapolation at {timestamp}: outside observed span")]
    CovariateExtrapolation { timestamp: DateTime<Utc> },

    /// An input file could not be parsed.
    #[error("parse error in {path}, record {record}: {message}")]
    Parse {
        path: String,
        record: u64,
        message: String,
    },

    /// A persisted model file has a schema version this build cannot read.
    #[error("unsupported model schema version {found} (supported: {supported})")]
    UnsupportedSchema { found: u32, supported: u32 },

    // --- numerics -----------------------------------------------------------
    /// The regression design matrix is singular (collinear columns).
    #[error("collinear regressors: {0}")]
    Collinear(String),

    /// A test statistic has no valid reference distribution.
    #[error("invalid degrees of freedom: {0}")]
    InvalidDof(String),

    /// Model search exhausted every candidate without an admissible fit.
    #[error("no admissible model: {0}")]
    NoAdmissibleModel(String),

    /// An optimizer or closed-form step produced non-finite numbers.
    #[error("numerical failure: {0}")]
    Numerical(String),

    // --- passthrough ----------------------------------------------------------
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Coarse category used by front ends to pick an exit code.
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            InvalidConfig(_) | UnknownTypeCode(_) => ErrorCategory::Config,
            InsufficientData { .. }
            | DegenerateSeries(_)
            | LeadingNonpositive { .. }
            | Alignment(_)
            | Transform(_)
            | MissingCovariate(_)
            | CovariateExtrapolation { .. }
            | Parse { .. }
            | UnsupportedSchema { .. }
            | Io(_)
            | Json(_)
            | Csv(_) => ErrorCategory::Data,
            Collinear(_) | InvalidDof(_) | NoAdmissibleModel(_) | Numerical(_) => {
                ErrorCategory::Numeric
            }
        }
    }
}

/// Coarse failure categories, in increasing order of "the data was fine,
/// the maths was not".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad flags, bad thresholds, malformed requests.
    Config,
    /// Unreadable, inconsistent, or insufficient input data.
    Data,
    /// Estimation or test-statistic failures.
    Numeric,
}
