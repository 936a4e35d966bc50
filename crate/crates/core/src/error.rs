use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{kind} file not found: {path}")]
    NotFound { kind: &'static str, path: PathBuf },

    #[error("invalid device table: {0}")]
    DeviceTable(String),

    #[error("level {level} out of range for a {levels}-level table")]
    LevelOutOfRange { level: usize, levels: usize },

    #[error("{path}: bad IDX magic 0x{found:08x}, expected 0x{expected:08x}")]
    IdxMagic { path: PathBuf, expected: u32, found: u32 },

    #[error("{path}: truncated IDX file, expected {expected} bytes, found {actual}")]
    IdxTruncated { path: PathBuf, expected: u64, actual: u64 },

    #[error("image/label count mismatch: {images} images, {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },

    #[error("{path}: label {label} at index {index} outside [0, 9]")]
    IdxLabel { path: PathBuf, index: usize, label: u8 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid cost table: {0}")]
    CostTable(String),

    #[error("serialization: {0}")]
    Serde(String),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }
}
