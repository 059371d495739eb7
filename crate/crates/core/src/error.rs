use std::path::PathBuf;

/// Errors produced anywhere in the streaming stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("truncated input at byte offset {offset}: {detail}")]
    Truncated { offset: u64, detail: String },
    #[error("malformed y4m stream: {0}")]
    Y4mHeader(String),
    #[error("unsupported y4m colorspace `{0}`")]
    UnsupportedColorspace(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("corrupt packet: {0}")]
    CorruptPacket(String),
    #[error("entropy stream: {0}")]
    Entropy(String),
    #[error("trace line {line}: {detail}")]
    Trace { line: usize, detail: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Truncated { .. } => "truncated",
            Error::Y4mHeader(_) => "y4m_header",
            Error::UnsupportedColorspace(_) => "unsupported_colorspace",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::CorruptPacket(_) => "corrupt_packet",
            Error::Entropy(_) => "entropy",
            Error::Trace { .. } => "trace",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
