use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure categories, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Model,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("reference source is empty")]
    EmptySource,

    #[error("invalid range for feature {feature}: min {min} > max {max}")]
    InvalidRange { feature: usize, min: f64, max: f64 },

    #[error("source cannot be enumerated exactly: {0}")]
    NotEnumerable(String),

    #[error("no reference satisfies the contrast filter `{0}`")]
    EmptyContrastClass(String),

    #[error("no dataset rows match the input on coalition {coalition:?}")]
    ConditioningSupport { coalition: Vec<usize> },

    #[error("model error: {0}")]
    Model(String),

    #[error("external model transport error: {0}")]
    Transport(String),

    #[error("external model did not answer within {0:?}")]
    Timeout(std::time::Duration),

    #[error("game arity {arity} exceeds the exact-enumeration cap {cap}; use a sampling estimator")]
    ArityOverCap { arity: usize, cap: usize },

    #[error("sampled least-squares system with {samples} coalitions is rank deficient for {players} players; increase the sample size")]
    UnderDetermined { samples: usize, players: usize },

    #[error("least-squares rows are not known to be unbiased; pass the assume-unbiased flag to build confidence intervals")]
    UnbiasedAssumptionRequired,

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("csv error at row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("dataset has no rows")]
    EmptyDataset,

    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable class name.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Schema(_) => "schema",
            Error::InvalidValue(_) => "invalid-value",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::EmptySource => "empty-source",
            Error::InvalidRange { .. } => "invalid-range",
            Error::NotEnumerable(_) => "not-enumerable",
            Error::EmptyContrastClass(_) => "empty-contrast-class",
            Error::ConditioningSupport { .. } => "conditioning-support",
            Error::Model(_) => "model",
            Error::Transport(_) => "model-transport",
            Error::Timeout(_) => "model-timeout",
            Error::ArityOverCap { .. } => "arity-over-cap",
            Error::UnderDetermined { .. } => "under-determined",
            Error::UnbiasedAssumptionRequired => "unbiased-assumption-required",
            Error::Parse { .. } => "parse",
            Error::Csv { .. } => "csv",
            Error::EmptyDataset => "empty-dataset",
            Error::Row { source, .. } => source.class(),
            Error::Io(_) => "io",
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidArgument(_) | Error::Parse { .. } | Error::UnbiasedAssumptionRequired => {
                ErrorCategory::Config
            }
            Error::Schema(_)
            | Error::InvalidValue(_)
            | Error::EmptySource
            | Error::InvalidRange { .. }
            | Error::NotEnumerable(_)
            | Error::EmptyContrastClass(_)
            | Error::ConditioningSupport { .. }
            | Error::Csv { .. }
            | Error::EmptyDataset
            | Error::Io(_) => ErrorCategory::Data,
            Error::Model(_) | Error::Transport(_) | Error::Timeout(_) => ErrorCategory::Model,
            Error::ArityOverCap { .. } | Error::UnderDetermined { .. } => ErrorCategory::Numeric,
            Error::Row { source, .. } => source.category(),
        }
    }

    pub(crate) fn at_row(self, row: usize) -> Error {
        Error::Row {
            row,
            source: Box::new(self),
        }
    }
}
