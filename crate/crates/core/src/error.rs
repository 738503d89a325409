use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// The variants map onto the process exit codes used by the `gca` binary:
/// data and index problems exit with 2, configuration and shape problems
/// with 3, numeric failures with 4.
#[derive(Debug, Error)]
pub enum GcaError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("capability error: {0}")]
    Capability(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl GcaError {
    pub fn exit_code(&self) -> i32 {
        match self {
            GcaError::Data(_) | GcaError::Index(_) | GcaError::Io { .. } => 2,
            GcaError::Config(_) | GcaError::Dimension(_) | GcaError::Capability(_) => 3,
            GcaError::Numeric(_) => 4,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        GcaError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, GcaError>;
