use thiserror::Error;

/// Failure classes, mapped one-to-one onto CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Io,
    Schema,
    Fit,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Unparseable {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column `{column}`: non-finite value")]
    NonFinite { row: usize, column: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("column mismatch: missing {missing:?}, extra {extra:?}")]
    ColumnMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("unsupported model file: {0}")]
    UnsupportedModel(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("unsupported format `{0}`")]
    UnsupportedFormat(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::Csv(e) if e.is_io_error() => ErrorKind::Io,
            Error::InvalidParam(_) | Error::UnsupportedFormat(_) => ErrorKind::Usage,
            Error::Fit(_) => ErrorKind::Fit,
            _ => ErrorKind::Schema,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
