use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),

    #[error("no data rows")]
    EmptyData,

    #[error("degenerate labels: label column has a single value")]
    DegenerateLabels,

    #[error("missing value in column `{column}` at data row {row}")]
    MissingValue { column: String, row: usize },

    #[error("non-numeric value `{value}` in column `{column}` at data row {row}")]
    NonNumeric {
        column: String,
        row: usize,
        value: String,
    },

    #[error("value `{value}` in declared-binary column `{column}` at data row {row} is not 0 or 1")]
    NotBinary {
        column: String,
        row: usize,
        value: String,
    },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("thresholds not increasing")]
    ThresholdsNotIncreasing,

    #[error("no cut points: column `{0}` is constant")]
    NoCutPoints(String),

    #[error("cannot parse item `{0}`")]
    ItemParse(String),

    #[error("fold count {k} exceeds observation count {n}")]
    TooManyFolds { k: usize, n: usize },

    #[error("no itemset reaches minimum support {min_support}; try a lower threshold")]
    NoFrequentItemsets { min_support: f64 },

    #[error("antecedent {0} appears more than once in the rule list")]
    DuplicateAntecedent(usize),

    #[error("antecedent index {index} out of range for a pool of {pool_size}")]
    AntecedentOutOfRange { index: usize, pool_size: usize },

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("at least two chains are required for the convergence diagnostic, got {0}")]
    TooFewChains(usize),

    #[error("both classes must be present")]
    SingleClass,

    #[error("empty posterior ensemble")]
    EmptyEnsemble,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
