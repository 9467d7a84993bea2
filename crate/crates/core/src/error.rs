use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or control does not match the network it is used with.
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },

    /// The network description itself is malformed.
    #[error("structural error: {0}")]
    Structure(String),

    /// A control vector is not an element of the control set.
    #[error("invalid control: {0}")]
    InvalidControl(String),

    /// A value violates a documented precondition (negative queue, bad bound, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    /// Identification could not finish within its step budget.
    #[error("identification aborted: {0}")]
    Identification(String),

    /// No candidate control sequence reaches the terminal set within the horizon.
    #[error("no exploration plan reaches the terminal set within {horizon} steps")]
    HorizonTooShort { horizon: usize },

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dim(what: &'static str, expected: usize, got: usize) -> Self {
        Error::Dimension { what, expected, got }
    }

    /// A configuration error naming the offending field.
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }
}
