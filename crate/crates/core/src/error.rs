use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("transfer function has a pole on the evaluation grid at {omega} rad/s")]
    PoleOnGrid { omega: f64 },

    #[error("unsupported delay: {0}")]
    UnsupportedDelay(String),

    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("perturbation out of range: {0}")]
    PerturbationOutOfRange(String),

    #[error("singular perturbation at {omega} rad/s")]
    SingularPerturbation { omega: f64 },

    #[error("relative error undefined: modeled response vanishes at index {index}")]
    DivisionGuard { index: usize },

    #[error("coefficient variation too wide: relative radius {radius} >= 1")]
    OverWideVariation { radius: f64 },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("variant {variant} references mode {mode} but only {available} modes were supplied")]
    VariantModeOutOfRange {
        variant: String,
        mode: usize,
        available: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite matrix entries")]
    NonFinite,

    #[error("nominal closed loop is unstable (max pole real part {max_real_part:.4e})")]
    NominalInstability { max_real_part: f64 },

    #[error("nominal closed loop has a pole near the imaginary axis at {omega} rad/s")]
    ClosedLoopPoleOnAxis { omega: f64 },

    #[error("synthesis failed: {0}")]
    Synthesis(String),

    #[error("{path}:{line}: malformed row: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
