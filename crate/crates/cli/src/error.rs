use std::fmt;
use std::path::Path;

/// Failure classes, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, config values or input content.
    Validation(String),
    /// Files that cannot be read or written.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<entroute::montecarlo::ExperimentError> for CliError {
    fn from(e: entroute::montecarlo::ExperimentError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<entroute::analytics::AnalyticsError> for CliError {
    fn from(e: entroute::analytics::AnalyticsError) -> Self {
        CliError::Validation(e.to_string())
    }
}
