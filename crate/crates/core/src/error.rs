use std::fmt;

use serde::Serialize;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed to converge or produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The censor equation has no bracketed root.
    #[error("existence failure ({}): {detail}", .failed.join(", "))]
    Existence { failed: Vec<String>, detail: String },

    /// A scenario or configuration value is missing or malformed.
    #[error("invalid `{key}`: {reason}")]
    Validation { key: String, reason: String },

    /// A predicted qualitative property did not hold on an evaluated grid.
    #[error("property violation: {0}")]
    PropertyViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used for exit statuses and C status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Domain,
    Numeric,
    Existence,
    Validation,
    PropertyViolation,
    Io,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ErrorKind::Domain => "domain",
            ErrorKind::Numeric => "numeric",
            ErrorKind::Existence => "existence",
            ErrorKind::Validation => "validation",
            ErrorKind::PropertyViolation => "property_violation",
            ErrorKind::Io => "io",
        };
        f.write_str(s)
    }
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn validation(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Domain(_) => ErrorKind::Domain,
            Error::Numeric(_) => ErrorKind::Numeric,
            Error::Existence { .. } => ErrorKind::Existence,
            Error::Validation { .. } => ErrorKind::Validation,
            Error::PropertyViolation(_) => ErrorKind::PropertyViolation,
            Error::Io(_) => ErrorKind::Io,
            // Malformed JSON is a configuration problem.
            Error::Json(_) => ErrorKind::Validation,
        }
    }

    /// Process exit status for the CLI: 2 for validation problems, 3 for
    /// numeric or existence failures.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Validation | ErrorKind::Io => 2,
            _ => 3,
        }
    }
}

/// Shorthand for rejecting non-finite inputs.
pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::domain(format!("{name} must be finite, got {value}")))
    }
}
