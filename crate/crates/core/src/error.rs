use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic: expected \"T2AVEMB1\", found {found:?}")]
    BadMagic { found: [u8; 8] },
    #[error("unsupported format version {found} (expected 1)")]
    VersionMismatch { found: u32 },
    #[error("unsupported dtype code {found} (only 0 = f32 little-endian)")]
    UnsupportedDtype { found: u32 },
    #[error("truncated payload: header declares {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("trailing bytes after payload: expected {expected} bytes, found {found}")]
    TrailingBytes { expected: u64, found: u64 },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("invalid embedding header: {0}")]
    InvalidHeader(String),
    #[error("row index {index} out of bounds for {count} rows")]
    IndexOutOfBounds { index: usize, count: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("insufficient rows: need at least {needed}, got {got}")]
    InsufficientRows { needed: usize, got: usize },
    #[error("invalid segment operation: {0}")]
    Segments(String),
    #[error("invalid probability row {row}: {reason}")]
    InvalidDistribution { row: usize, reason: String },
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e}, tolerance {tolerance:.3e})")]
    Asymmetric { asymmetry: f64, tolerance: f64 },
    #[error("eigensolver did not converge: {0}")]
    NonConvergence(String),
    #[error("matrix is indefinite: eigenvalue {eigenvalue:.6e} below tolerance {tolerance:.6e}")]
    Indefinite { eigenvalue: f64, tolerance: f64 },
    #[error("zero-norm vector at batch {batch}, step {step}")]
    ZeroNorm { batch: usize, step: usize },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical routines (as opposed to bad input data).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Asymmetric { .. } | Error::NonConvergence(_) | Error::Indefinite { .. }
        )
    }
}
