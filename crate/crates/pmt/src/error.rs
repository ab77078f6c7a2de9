use std::path::PathBuf;

/// Errors of the file, report and command layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] pmt_core::Error),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{stage}: {source}")]
    Stage { stage: String, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code: 2 usage or configuration, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        use pmt_core::Error as Core;
        match self {
            Error::Usage(_) | Error::Config(_) => 2,
            Error::Data(_) | Error::Io { .. } => 3,
            Error::Core(Core::Config(_)) => 2,
            Error::Core(Core::Data(_) | Core::InsufficientData { .. }) => 3,
            Error::Core(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: impl Into<String>) -> Result<T>;
}

impl<T, E: Into<Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: impl Into<String>) -> Result<T> {
        self.map_err(|e| Error::Stage { stage: stage.into(), source: Box::new(e.into()) })
    }
}
