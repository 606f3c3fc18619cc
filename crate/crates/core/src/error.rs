use thiserror::Error;

/// Errors produced by the enhancement engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch for `{name}`: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("missing tensor `{0}`")]
    MissingTensor(String),

    #[error("unexpected tensor `{0}`")]
    UnexpectedTensor(String),

    #[error("bad magic: not an ACNW weight file")]
    BadMagic,

    #[error("unsupported weight file version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated weight file: {0}")]
    Truncated(String),

    #[error("truncated tensor `{0}`")]
    TruncatedTensor(String),

    #[error("weight file has {0} trailing bytes after the last tensor")]
    TrailingBytes(usize),

    #[error("duplicate tensor `{0}`")]
    DuplicateTensor(String),

    #[error("invalid tensor entry `{name}`: {reason}")]
    InvalidTensor { name: String, reason: String },

    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("audio format error: {0}")]
    AudioFormat(String),

    #[error("undefined reference: reference signal has zero energy")]
    ZeroReference,

    #[error("unknown layer `{name}`; available adaptive layers: {}", available.join(", "))]
    UnknownLayer { name: String, available: Vec<String> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
