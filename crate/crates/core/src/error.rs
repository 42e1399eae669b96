use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate s-interval: stock bid {bid} equals ask {ask}")]
    DegenerateInterval { bid: f64, ask: f64 },

    #[error("M must be odd, got {0}")]
    EvenGridSize(usize),

    #[error("M must be at least 5, got {0}")]
    GridTooSmall(usize),

    #[error("invalid data block {id}: {reason}")]
    InvalidBlock { id: String, reason: String },

    #[error("point (s={s}, t={t}) lies outside the domain")]
    OutOfDomain { s: f64, t: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("duplicate matrix entry at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },

    #[error("entry ({row}, {col}) out of range for a {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("dense solve is limited to {limit} unknowns, got {n}")]
    DenseTooLarge { n: usize, limit: usize },

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("missing ground truth for option {0}")]
    MissingGroundTruth(String),

    #[error("{0}")]
    EmptyInput(&'static str),

    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Diverged { iteration: usize, loss: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular | Error::Diverged { .. } | Error::DenseTooLarge { .. }
        )
    }
}
