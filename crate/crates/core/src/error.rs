use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot parse family id {input:?}: bad segment {segment:?} ({reason})")]
    FamilyId {
        input: String,
        segment: String,
        reason: String,
    },

    #[error("asset pack {pack:?} is not available: {reason}")]
    MissingAsset { pack: String, reason: String },

    #[error("degenerate curriculum: {0}")]
    DegeneratePlan(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("dataset not found at {0}")]
    MissingDataset(PathBuf),

    #[error("prediction coverage error: {0}")]
    Coverage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    /// True for errors caused by the caller's flags or configuration rather
    /// than by the environment at run time.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::InvalidConfig(_)
                | Error::FamilyId { .. }
                | Error::MissingAsset { .. }
                | Error::DegeneratePlan(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
