use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sample size below 4 (n = {0})")]
    SampleTooSmall(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "series did not converge within {terms} terms (partial sum {partial_sum:e}, last term {last_term:e})"
    )]
    NonConvergence {
        terms: usize,
        partial_sum: f64,
        last_term: f64,
    },
}

impl Error {
    /// Numeric failures (as opposed to bad user input).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonConvergence { .. })
    }
}
