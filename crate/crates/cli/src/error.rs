use slipctl_core::Error as CoreError;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("cannot read config {file}: {source}")]
    ConfigRead {
        file: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse config {file}: {source}")]
    ConfigParse {
        file: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: CoreError,
    },

    #[error("cannot write {file}: {source}")]
    Output {
        file: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output {file}: {source}")]
    Csv {
        file: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("worker pool: {0}")]
    Workers(String),
}

impl CliError {
    pub fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        CliError::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Process exit status; 2 is shared with command-line usage errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::ConfigRead { .. } | CliError::ConfigParse { .. } => 2,
            CliError::Output { .. } | CliError::Csv { .. } => 3,
            CliError::Workers(_) => 4,
            CliError::Core { source, .. } => match source {
                CoreError::Validation(_) => 2,
                CoreError::Io(_) | CoreError::Json(_) => 3,
                CoreError::Parse { .. } | CoreError::Geometry(_) | CoreError::Assembly { .. } => 10,
                CoreError::Eigen { .. } => 11,
                CoreError::Solver(_) | CoreError::NonConvergence { .. } => 12,
                CoreError::Optimizer(_) => 13,
                CoreError::Cache(_) => 14,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attaches a description of the failing stage to core errors.
pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T> Context<T> for slipctl_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|source| CliError::Core {
            context: what(),
            source,
        })
    }
}
