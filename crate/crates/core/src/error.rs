use thiserror::Error;

/// Errors produced by the regression library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point {index} lies outside [-1,1]^n")]
    OutOfCube { index: usize },

    #[error("band {band} too wide for cell {cell:?} on axis {axis} (width {width})")]
    BandTooWide {
        cell: Vec<usize>,
        axis: usize,
        band: f64,
        width: f64,
    },

    #[error("cell {cell:?} contains no samples")]
    EmptyCell { cell: Vec<usize> },

    #[error("every cell of the partition is empty")]
    AllCellsEmpty,

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("input error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than numerical trouble.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Lp(_) | Error::AllCellsEmpty | Error::EmptyCell { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
