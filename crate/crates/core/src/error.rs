use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("singular system: pivot {pivot:e} below tolerance {tolerance:e}")]
    Singular { pivot: f64, tolerance: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("index {index} out of range (limit {limit})")]
    OutOfRange { index: usize, limit: usize },

    #[error("degenerate matrix: {0}")]
    Degenerate(String),

    #[error("basis is not orthonormal (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("problem too large: {cells} matrix cells exceeds cap {cap}")]
    TooLarge { cells: usize, cap: usize },

    #[error("window {window}: {source}")]
    Window {
        window: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn at_window(self, window: usize) -> Self {
        Error::Window {
            window,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
