use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Two tracked eigenvalue paths merged or swapped between `s_lo` and `s_hi`.
    #[error("eigenvalue crossing between s = {s_lo} and s = {s_hi} (blocks {blocks:?})")]
    Crossing {
        s_lo: f64,
        s_hi: f64,
        blocks: Vec<usize>,
    },

    #[error("unsupported Jordan structure: {0}")]
    UnsupportedStructure(String),

    #[error("gap collapse between blocks {beta} and {alpha} at s = {s} (|gap| = {gap:e})")]
    GapCollapse {
        beta: usize,
        alpha: usize,
        s: f64,
        gap: f64,
    },

    #[error("capacity exceeded: {0}")]
    Capacity(String),
}

impl Error {
    /// True for errors that stem from the Jordan structure of the generator
    /// (crossings, defective or unsupported blocks, collapsing gaps).
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            Error::Crossing { .. } | Error::UnsupportedStructure(_) | Error::GapCollapse { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
