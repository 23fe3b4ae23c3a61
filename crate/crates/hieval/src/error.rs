//! Failure classes and their process exit codes.

use std::fmt;

/// Exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    /// The run finished but quality thresholds were violated.
    Diagnostics = 1,
    /// Bad files, flags or model definitions.
    Input = 2,
    /// Sampling or density evaluation failed.
    Numeric = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind: ExitKind::Input,
            error: error.into(),
        }
    }

    pub fn diagnostics(error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind: ExitKind::Diagnostics,
            error: error.into(),
        }
    }

    pub fn numeric(error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind: ExitKind::Numeric,
            error: error.into(),
        }
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }

    pub fn context(self, message: impl fmt::Display + Send + Sync + 'static) -> Self {
        Self {
            kind: self.kind,
            error: self.error.context(message),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches an exit class to fallible calls.
pub trait Classify<T> {
    fn input(self) -> CliResult<T>;
    fn numeric(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> CliResult<T> {
        self.map_err(CliError::input)
    }

    fn numeric(self) -> CliResult<T> {
        self.map_err(CliError::numeric)
    }
}
