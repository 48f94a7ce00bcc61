use std::path::{Path, PathBuf};

/// Failure of a command, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("numeric error: {0}")]
    Numeric(disco_core::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for configuration, 3 for data and files, 4 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<disco_core::Error> for CliError {
    fn from(e: disco_core::Error) -> Self {
        use disco_core::Error as E;
        match e {
            E::Parameter(_) | E::Contract(_) => CliError::Config(e.to_string()),
            E::Dimension { .. } => CliError::Data(e.to_string()),
            E::Estimator { .. } | E::Numeric(_) | E::Diverged { .. } => CliError::Numeric(e),
        }
    }
}
