use std::path::PathBuf;

use xcm_bootstrap::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("cannot fit the model: {0}")]
    Fit(CoreError),
    #[error("{0}")]
    Mass(CoreError),
    #[error("{0}")]
    Plugin(CoreError),
    #[error("alpha list rejected: {0}")]
    Alphas(CoreError),
    #[error("{0}")]
    Core(CoreError),
    #[error("invalid arguments: {0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Serialize(String),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Usage(_) => 2,
            CliError::Fit(_) => 3,
            CliError::Mass(_) => 4,
            CliError::Plugin(_) => 5,
            CliError::Alphas(_) => 6,
            CliError::Core(_) | CliError::Io { .. } | CliError::Serialize(_) => 1,
        }
    }

    /// Classifies a core error raised while fitting or running the pipeline.
    pub fn from_core(e: CoreError) -> Self {
        match e {
            CoreError::InsufficientRuns { .. } | CoreError::RankDeficient { .. } => {
                CliError::Fit(e)
            }
            CoreError::NonIntegerMass { .. } => CliError::Mass(e),
            CoreError::PluginFailure(_) => CliError::Plugin(e),
            other => CliError::Core(other),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
