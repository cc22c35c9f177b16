use thiserror::Error;

/// Errors raised by the numerical core, the tick parser and the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Requested polynomial order exceeds what the basis can handle in `f64`.
    #[error("{basis} basis supports n <= {limit}, requested n = {requested}")]
    Capability {
        basis: &'static str,
        limit: usize,
        requested: usize,
    },

    /// No time-measure mass in the averaging window.
    #[error("empty window: no observations carry time-measure mass")]
    EmptyWindow,

    #[error("no traded volume in the averaging window")]
    NoVolume,

    #[error("degenerate state: quadratic form denominator is {0}")]
    DegenerateState(f64),

    #[error("line {line}: {message}")]
    Data { line: u64, message: String },

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
