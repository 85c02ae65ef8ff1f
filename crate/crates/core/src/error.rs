use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (dimensions, ranges).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A factorization met a pivot below tolerance.
    #[error("solver failure: pivot {pivot} below tolerance")]
    Solver { pivot: usize },

    /// The channel matrix carries no energy (zero trace).
    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    /// Code construction ran out of retries.
    #[error("code construction failed: {0}")]
    Construction(String),

    /// A quantity that is analytically bounded left its range.
    #[error("numerical consistency: {0}")]
    Numerical(String),

    /// Configuration problems; every offending key is listed.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("malformed alist input: {0}")]
    Alist(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
