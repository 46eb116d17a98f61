use qpt_core::QptError;
use std::fmt;

/// Failure of a subcommand, mapped onto the process exit status.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad flags, config keys or files; exit status 1.
    Usage(String),
    /// A solver or measure broke a numerical invariant; exit status 2.
    Numerical(String),
    /// The cross-check found a deviation above tolerance; exit status 3.
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Validation(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<QptError> for CliError {
    fn from(e: QptError) -> Self {
        match e {
            QptError::Convergence { .. } | QptError::NumericalIntegrity(_) | QptError::DimensionMismatch { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("json: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
