use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An enumeration would exceed its configured cap.
    #[error("refusing to enumerate {what}: {} exceeds the cap of {cap}", fmt_count(.count))]
    Refused {
        what: &'static str,
        /// Exact count, or an upper bound on it; `None` when it overflows `u128`.
        count: Option<u128>,
        cap: u128,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

fn fmt_count(count: &Option<u128>) -> String {
    match count {
        Some(c) => c.to_string(),
        None => "a count beyond 2^128".to_string(),
    }
}
