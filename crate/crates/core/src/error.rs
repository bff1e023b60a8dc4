use std::path::PathBuf;

/// Errors surfaced by every stage of the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("bandwidth h = {h} is too small for the grid: smoother band reaches {band_edge} cycles/unit, Nyquist is {nyquist}")]
    Nyquist { h: f64, band_edge: f64, nyquist: f64 },

    #[error("smoother landmark `{name}` not found in [{lo}, {hi}]")]
    LandmarkNotFound { name: &'static str, lo: f64, hi: f64 },

    #[error("Assumption K sandwich violated for beta = {beta}: {detail}")]
    SandwichViolated { beta: f64, detail: String },

    #[error("class membership failed: {0}")]
    ClassMembership(String),

    #[error("class integral did not converge: {0}")]
    NonConvergent(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed file {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("checksum mismatch for {path}: expected {expected}, found {found}")]
    Checksum {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("format version mismatch: expected {expected}, found {found}")]
    Version { expected: u32, found: u32 },

    #[error("config error in scenario `{scenario}`: {detail}")]
    Scenario { scenario: String, detail: String },

    #[error("config parse error at line {line}, column {column}: {detail}")]
    ConfigParse {
        line: usize,
        column: usize,
        detail: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
