use thiserror::Error;

/// Errors reported by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),
    /// A message index was outside its message set.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    /// Blocklength below the required floor 2/(1-eps).
    #[error("blocklength {n} is below the required floor {floor}")]
    BlocklengthFloor { n: u64, floor: u64 },
    /// A sampled functional evaluated to a non-finite value.
    #[error("non-finite evaluation at sampled point {point:?}")]
    NonFinite { point: Vec<f64> },
    /// Malformed codebook file.
    #[error("codebook format: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
