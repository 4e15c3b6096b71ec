use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("image dimensions {width}x{height} are not a multiple of block size {block_size}")]
    NonDivisible { width: usize, height: usize, block_size: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no {what} neighbour available for block {block}")]
    MissingNeighbor { block: usize, what: &'static str },

    #[error("context {context} is not stored for block {block}")]
    ContextNotStored { block: usize, context: u8 },

    #[error("decoding failed for block {block}, plane {plane}: {reason}")]
    DecodingFailure { block: usize, plane: usize, reason: String },

    #[error("placement step too coarse: {0}")]
    StepTooCoarse(String),

    #[error("block set is not connected: {0}")]
    Disconnected(String),

    #[error("container: {0}")]
    Container(String),

    #[error("trace {path}:{line}: {reason}")]
    Trace { path: PathBuf, line: u64, reason: String },

    #[error("evaluation: {0}")]
    Eval(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
