use std::fmt;

/// A command failure with the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or missing inputs; exit code 2.
    Usage(String),
    /// Anything that went wrong after validation; exit code 1.
    Failed(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Failed(err) => write!(f, "{err:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<salmap::Error> for CliError {
    fn from(err: salmap::Error) -> Self {
        match err {
            salmap::Error::Config(_) | salmap::Error::Argument(_) => {
                CliError::Usage(err.to_string())
            }
            other => CliError::Failed(other.into()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Failed(err)
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Failed(err.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

macro_rules! usage {
    ($($arg:tt)*) => { $crate::error::CliError::Usage(format!($($arg)*)) };
}
pub(crate) use usage;
