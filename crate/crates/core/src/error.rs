use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("column {0} is entirely zero")]
    ZeroColumn(usize),

    #[error("matrix contains a non-finite entry")]
    NonFinite,

    #[error("instance too large for exhaustive search: {size} > {max}")]
    TooLarge { size: usize, max: usize },

    #[error("negative entry at index {0}")]
    NegativeEntry(usize),

    #[error("value {value} outside domain {domain}")]
    DomainError { value: f64, domain: &'static str },

    #[error("no solution set available for a = {0}")]
    UnsupportedStructure(f64),

    #[error("random embedding matrix rank deficient after {0} attempts")]
    RankDeficient(usize),

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("trace too short: {len} < {min}")]
    TooShort { len: usize, min: usize },

    #[error("no samples survived the filter (threshold {threshold})")]
    EmptyFilter { threshold: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("invalid config: {0}")]
    Config(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
