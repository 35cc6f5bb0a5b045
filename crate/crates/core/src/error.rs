use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot decode image {path}: {reason}")]
    ImageDecode { path: PathBuf, reason: String },
    #[error("unsupported depth: {path} has {bits}-bit samples (only 8-bit and lower are accepted)")]
    UnsupportedDepth { path: PathBuf, bits: u8 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid pixel data: {0}")]
    InvalidImage(String),
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("duplicate image id {0:?} in manifest")]
    DuplicateImageId(String),
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("zero-area image")]
    ZeroArea,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("symbol {value} cannot be coded: {reason}")]
    Symbol { value: i32, reason: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
    #[error("missing checkpoint for cell lambda={lambda:.3}{}", match .l { Some(l) => format!(", l={l}"), None => String::new() })]
    MissingCell { lambda: f64, l: Option<usize> },
    #[error("unknown image id {0:?}")]
    UnknownImage(String),
    #[error("not enough points to plot: need at least 2, got {0}")]
    TooFewPoints(usize),
    #[error("empty pair set")]
    EmptyPairs,
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
