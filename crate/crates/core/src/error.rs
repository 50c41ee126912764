use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite value at {context}")]
    NonFinite { context: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error(
        "kernel matrix is indefinite (min eigenvalue {min_eigenvalue:e}); clip it before fitting"
    )]
    Indefinite { min_eigenvalue: f64 },

    #[error(
        "the Jackson-Chebyshev kernel is defined on scalar inputs only, got {dims} feature columns; \
         reduce the data to one spectral coordinate (e.g. energy) or use a standard kernel"
    )]
    VectorInputToSpectralKernel { dims: usize },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("bound state leaks to the grid boundary (amplitude {amplitude:e}); enlarge the half-width L")]
    BoundaryLeak { amplitude: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
