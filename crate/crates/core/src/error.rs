use thiserror::Error;

/// Failure modes shared by every module of the lab.
#[derive(Debug, Error)]
pub enum Error {
    /// Arguments violate an operation's preconditions.
    #[error("input error: {0}")]
    Input(String),

    /// The input sits on a degenerate set (e.g. exactly on a heteroclinic cycle).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A run configuration cannot deliver the requested accuracy.
    #[error("configuration error: {0}")]
    Config(String),

    /// A constructed object fails one of its defining properties.
    #[error("construction error ({property}): {detail}")]
    Construction { property: String, detail: String },

    /// A size cap was exceeded.
    #[error("resource limit: {0}")]
    Resource(String),

    /// The operation is not defined for this system family.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
