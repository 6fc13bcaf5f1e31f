use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Model,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Data(#[from] crate::data::DataError),

    #[error(transparent)]
    Backbone(#[from] crate::backbone::BackboneError),

    #[error(transparent)]
    Head(#[from] crate::head::HeadError),

    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        use crate::backbone::BackboneError as B;
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Backbone(B::ModelFileUnreadable { .. } | B::DimensionMismatch { .. })
            | Error::Backbone(B::UnsupportedModel(_)) => ErrorKind::Model,
            Error::Head(crate::head::HeadError::BadParameterFile { .. }) => ErrorKind::Model,
            _ => ErrorKind::Data,
        }
    }
}
