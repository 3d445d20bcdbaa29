use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Arguments outside the range where an operation is defined.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A brute-force enumeration would visit more points than allowed.
    #[error("enumeration cap exceeded: {requested} points requested, cap is {cap}")]
    EnumerationCap { requested: String, cap: u64 },

    /// A periodic grid would hold more cells than allowed.
    #[error("grid cap exceeded: {requested} cells requested, cap is {cap}")]
    GridCap { requested: String, cap: u64 },

    /// Two independent evaluation routes disagreed; always a bug.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
