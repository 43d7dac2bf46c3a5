use std::fmt;

use drskit::corpus::CorpusError;
use drskit::plausibility::PllError;
use drskit::recombine::RecombineError;
use drskit::split::SplitError;

/// What went wrong, as far as the exit status is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    /// Bad flags or configuration.
    Usage,
    /// Input files that cannot be read or do not make sense together.
    Data,
    /// The external plausibility scorer failed or broke protocol.
    Scorer,
}

impl Failure {
    pub fn exit_code(self) -> i32 {
        match self {
            Failure::Usage => 1,
            Failure::Data => 2,
            Failure::Scorer => 3,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub failure: Failure,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        CliError {
            failure: Failure::Usage,
            error: error.into(),
        }
    }

    pub fn data(error: impl Into<anyhow::Error>) -> Self {
        CliError {
            failure: Failure::Data,
            error: error.into(),
        }
    }

    pub fn scorer(error: impl Into<anyhow::Error>) -> Self {
        CliError {
            failure: Failure::Scorer,
            error: error.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.failure.exit_code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::data(e)
    }
}

impl From<SplitError> for CliError {
    fn from(e: SplitError) -> Self {
        match e {
            SplitError::InvalidPolicy(_) => CliError::usage(e),
            _ => CliError::data(e),
        }
    }
}

impl From<RecombineError> for CliError {
    fn from(e: RecombineError) -> Self {
        match e {
            RecombineError::Config(_) => CliError::usage(e),
            _ => CliError::data(e),
        }
    }
}

impl From<PllError> for CliError {
    fn from(e: PllError) -> Self {
        match e {
            PllError::InvalidFraction(_) | PllError::InvalidSpec(_) => CliError::usage(e),
            PllError::EmptySentence => CliError::data(e),
            PllError::Spawn { .. }
            | PllError::Io(_)
            | PllError::Timeout(_)
            | PllError::Closed
            | PllError::Protocol { .. }
            | PllError::Remote { .. } => CliError::scorer(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e)
    }
}

/// Attaches context to any error convertible into a [`CliError`], keeping its class.
pub trait Context<T> {
    fn context(self, message: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: Into<CliError>> Context<T> for Result<T, E> {
    fn context(self, message: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| {
            let mut e = e.into();
            e.error = e.error.context(message.to_string());
            e
        })
    }
}
