use std::path::PathBuf;

/// Configuration problems. Every variant names the offending key or identifier.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("malformed configuration: {0}")]
    Syntax(String),
    #[error("unknown asset identifier `{id}` in `{key}`")]
    UnknownIdentifier { key: String, id: String },
    #[error("`{key}` = {value} is not a probability in [0, 1]")]
    Probability { key: String, value: f64 },
    #[error("`{key}` must sum to 1 (got {sum})")]
    ProbabilitySum { key: String, sum: f64 },
    #[error("`{key}` has lo {lo} > hi {hi}")]
    Bounds { key: String, lo: f64, hi: f64 },
    #[error("`{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("unknown preset `{0}` (expected incremental_class, incremental_lighting or incremental_weather)")]
    UnknownPreset(String),
}

/// Failures while running a stream or reading its outputs.
#[derive(Debug, thiserror::Error)]
pub enum StreamError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{}: {message}", path.display())]
    Manifest { path: PathBuf, message: String },
}

impl StreamError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
