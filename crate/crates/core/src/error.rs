use std::path::PathBuf;

/// Errors produced by the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown built-in profile `{0}` (expected one of: sot, sram_0v5, sram_0v7, fefet)")]
    UnknownProfile(String),

    #[error("profile line {line}: {message}")]
    ProfileSyntax { line: usize, message: String },

    #[error("profile field `{field}`: {message}")]
    InvalidProfile {
        field: &'static str,
        message: String,
    },

    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("item {index}: width {found} does not match array width {expected}")]
    WidthMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("embedding dimension {found} does not match encoder dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("feature `{feature}`: value index {value} out of range for cardinality {cardinality}")]
    ValueOutOfRange {
        feature: String,
        value: usize,
        cardinality: usize,
    },

    #[error("data: {0}")]
    Data(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
