use fwelnet::FwelnetError;

/// Failure classes, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag combinations (exit 1).
    Usage(String),
    /// Unreadable, malformed or inconsistent input files (exit 2).
    Data(String),
    /// The fit itself failed (exit 3).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<FwelnetError> for CliError {
    fn from(e: FwelnetError) -> Self {
        let msg = e.to_string();
        match e {
            FwelnetError::InvalidInput(_) | FwelnetError::LambdaNotOnPath(_) => CliError::Usage(msg),
            FwelnetError::Numerical(_) => CliError::Numerical(msg),
            FwelnetError::Dimension(_)
            | FwelnetError::NonFinite { .. }
            | FwelnetError::Parse { .. }
            | FwelnetError::Io { .. } => CliError::Data(msg),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn write_error(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("cannot write {}: {e}", path.display()))
}
