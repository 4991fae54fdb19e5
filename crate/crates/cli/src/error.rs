use std::fmt;

/// Failure of a CLI invocation, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configuration or input files; exit code 2.
    Usage(String),
    /// Numerical or domain failure; exit code 3.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl From<heavytail::Error> for CliError {
    fn from(e: heavytail::Error) -> Self {
        if e.is_config() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Numeric(e.to_string())
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
