use bear_core::BearError;

/// Failure of a command, carrying its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Format(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 5,
            CliError::Domain(_) => 6,
        }
    }
}

impl From<BearError> for CliError {
    fn from(e: BearError) -> Self {
        let msg = e.to_string();
        match e {
            BearError::Parameter(_) | BearError::Capacity(_) | BearError::Size(_) => CliError::Usage(msg),
            BearError::Format { .. } | BearError::Dimension(_) => CliError::Format(msg),
            BearError::Numerical(_) | BearError::Degenerate(_) => CliError::Numerical(msg),
            BearError::Storage { .. } => CliError::Io(msg),
            BearError::Domain(_) => CliError::Domain(msg),
        }
    }
}
