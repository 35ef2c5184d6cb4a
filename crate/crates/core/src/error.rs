use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("partition depth {depth} exceeds the supported maximum of {max}")]
    DepthOverflow { depth: u32, max: u32 },

    #[error("point {point:?} lies outside the unit domain")]
    Domain { point: Vec<f64> },

    #[error("value {value} is not finite after the CDF transform")]
    TransformDomain { value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("enumeration oracle supports Z-trees of depth at most {max}, got {depth}")]
    OracleScale { depth: u32, max: u32 },

    #[error("column `{column}` has a non-finite value at row {row}")]
    NonFinite { column: String, row: usize },

    #[error("column lengths differ: {0:?}")]
    LengthMismatch(Vec<usize>),

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("no rows left after dropping {dropped} incomplete rows")]
    AllRowsDropped { dropped: usize },

    #[error("column `{0}` is constant and cannot be rescaled")]
    DegenerateColumn(String),

    #[error("cannot subsample {requested} rows from {available}")]
    SubsampleTooLarge { requested: usize, available: usize },

    #[error("grid is empty")]
    EmptyGrid,

    #[error("conditioning variable `{0}` not found")]
    ConditionerNotFound(String),

    #[error("need at least {needed} variables besides the conditioner, got {found}")]
    TooFewVariables { needed: usize, found: usize },

    #[error("failed to read {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by the content of the input data rather than by how the
    /// library was called. The CLI maps these to exit code 3.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::TransformDomain { .. }
                | Error::NonFinite { .. }
                | Error::LengthMismatch(_)
                | Error::MissingColumn(_)
                | Error::AllRowsDropped { .. }
                | Error::DegenerateColumn(_)
                | Error::SubsampleTooLarge { .. }
                | Error::ConditionerNotFound(_)
                | Error::TooFewVariables { .. }
                | Error::Csv { .. }
                | Error::Io(_)
        )
    }
}
