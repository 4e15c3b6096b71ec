//! Session messages. Every message is one JSON object: framed by a 4-byte
//! big-endian length on raw sockets, one text frame per message on
//! websockets.

use serde::{Deserialize, Serialize};

/// Largest accepted frame.
pub const MAX_FRAME: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum ClientMessage {
    Open,
    Request(ViewRequest),
    Close { session_id: u64 },
}

/// Angles in radians. `fov` is (horizontal, vertical) and `vp_dims`
/// (width, height) in pixels; both default to the server template.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewRequest {
    pub session_id: u64,
    pub longitude: f64,
    pub latitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fov: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vp_dims: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub block_id: usize,
    pub context_id: u8,
    pub bits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub request_bits: usize,
    pub accumulated_bits: u64,
    pub usefulness: f64,
    /// `null` without a reference image or for a lossless view.
    pub psnr_db: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewResponse {
    pub session_id: u64,
    pub blocks: Vec<BlockEntry>,
    /// Base64 PNG of the rendered viewport.
    pub viewport: String,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMessage {
    Opened { session_id: u64 },
    View(ViewResponse),
    Closed { session_id: u64 },
    Error { kind: ErrorKind, message: String, session_id: Option<u64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Not a valid message.
    BadRequest,
    UnknownSession,
    /// Valid message the codec rejected; the session is unchanged.
    InvalidView,
    Internal,
}
