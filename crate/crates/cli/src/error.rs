use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("missing artifact {path}: run `{needs}` first")]
    MissingArtifact { path: PathBuf, needs: &'static str },

    #[error("{context} {path}: {source}")]
    Io {
        context: &'static str,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(tscf_core::Error),
}

impl CliError {
    /// Maps core errors onto the config/data split used for exit codes.
    pub fn from_core(err: tscf_core::Error) -> Self {
        match err {
            tscf_core::Error::InvalidConfig(msg) => CliError::Config(msg),
            other => CliError::Core(other),
        }
    }

    /// 1 for configuration problems, 2 for everything touching data.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(context: &'static str, path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { context, path, source }
    }
}

impl From<tscf_core::Error> for CliError {
    fn from(err: tscf_core::Error) -> Self {
        CliError::from_core(err)
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
