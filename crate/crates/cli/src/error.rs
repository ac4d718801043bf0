use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] splatstream::Error),

    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("dataset {}: {message}", root.display())]
    Dataset { root: PathBuf, message: String },
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dataset(root: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Dataset {
            root: root.into(),
            message: message.into(),
        }
    }

    /// 2 for configuration mistakes, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(splatstream::Error::Config { .. }) => 2,
            _ => 1,
        }
    }
}

impl From<CliError> for splatstream::Error {
    fn from(e: CliError) -> Self {
        match e {
            CliError::Core(e) => e,
            other => splatstream::Error::Io(io::Error::other(other.to_string())),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
