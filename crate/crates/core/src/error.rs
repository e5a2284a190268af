use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("parse error at row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("label error: {0}")]
    Label(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("sensitive attribute is not part of the encoding")]
    SensitiveAbsent,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("influence set is empty (no discriminatory pairs)")]
    EmptyInfluenceSet,

    #[error("sensitive group `{0}` has no rows")]
    MissingGroup(String),

    #[error("model shows no individual discrimination; dataset is already fair")]
    AlreadyFair,

    #[error("out of range: {0}")]
    Range(String),

    #[error("every test row was filtered out as unfair")]
    EmptyAfterFilter,

    #[error("experiment result has no records")]
    EmptyResult,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported model file: {0}")]
    ModelFormat(String),
}

impl Error {
    /// Stable machine-readable identifier for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::Parse { .. } => "ParseError",
            Error::Label(_) => "LabelError",
            Error::EmptyDataset => "EmptyDataset",
            Error::SensitiveAbsent => "SensitiveAbsent",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::EmptyInfluenceSet => "EmptyInfluenceSet",
            Error::MissingGroup(_) => "MissingGroup",
            Error::AlreadyFair => "AlreadyFair",
            Error::Range(_) => "RangeError",
            Error::EmptyAfterFilter => "EmptyAfterFilter",
            Error::EmptyResult => "EmptyResult",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::ModelFormat(_) => "ModelFormat",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
