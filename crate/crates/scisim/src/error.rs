//! Error type shared by every module.
//!
//! Two classes only: validation failures (bad parameters, inconsistent
//! shapes, malformed config) and I/O failures. The CLI maps them to exit
//! codes 1 and 2 respectively.

use std::fmt;

#[derive(Debug)]
pub enum Error {
    /// A parameter, shape, or file content violated a contract.
    Validation(String),
    /// A filesystem operation failed.
    Io(String),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn io(msg: impl Into<String>) -> Self {
        Error::Io(msg.into())
    }

    /// Wrap a `std::io::Error` with the path it concerns.
    pub fn io_path(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io(format!("{}: {}", path.display(), err))
    }

    /// Process exit code for the CLI: 1 validation, 2 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) => 1,
            Error::Io(_) => 2,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Error::validation("x").exit_code(), 1);
        assert_eq!(Error::io("y").exit_code(), 2);
    }
}
