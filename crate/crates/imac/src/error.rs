//! Error classes and their process exit codes.

use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad flags, config values or config files.
    Config,
    /// Unreadable, unwritable or malformed data files.
    Io,
    /// A runtime consistency check failed.
    Invariant,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Io => 3,
            ErrorClass::Invariant => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub class: ErrorClass,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        self.class.exit_code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

pub fn config_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError { class: ErrorClass::Config, error: e.into() }
}

pub fn io_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError { class: ErrorClass::Io, error: e.into() }
}

pub fn invariant_err(msg: impl Into<String>) -> CliError {
    CliError { class: ErrorClass::Invariant, error: anyhow::anyhow!(msg.into()) }
}

/// Tags any error as an IO failure on `path`.
pub fn io_at<E: Into<anyhow::Error>>(path: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| io_err(e.into().context(format!("{}", path.display())))
}

pub trait ResultExt<T> {
    fn config(self) -> CliResult<T>;
    fn io(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> ResultExt<T> for Result<T, E> {
    fn config(self) -> CliResult<T> {
        self.map_err(config_err)
    }

    fn io(self) -> CliResult<T> {
        self.map_err(io_err)
    }
}
