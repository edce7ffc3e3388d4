use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    /// The affine piece misses `B(0, 2)`, so the cap-hull is empty.
    #[error("infeasible cell: foot point norm {c_norm} exceeds 2")]
    InfeasibleCell { c_norm: f64 },

    /// The disk `{z in P, |z| <= R}` is empty because `|P(0)| > R`.
    #[error("infeasible disk: foot point norm {c_norm} exceeds radius {radius}")]
    Infeasible { c_norm: f64, radius: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("invalid config: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            msg: msg.into(),
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
