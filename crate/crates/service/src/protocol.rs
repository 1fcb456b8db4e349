//! Wire format shared by the server, the browser viewer and test clients.
//!
//! Client to server: one JSON text message per request.
//! Server to client: one binary message per frame, or a JSON text message
//! for an error.
//!
//! Frame layout, all integers little endian:
//!
//! | offset | size | field                      |
//! |--------|------|----------------------------|
//! | 0      | 4    | `frame_id` (u32)           |
//! | 4      | 2    | `width` (u16)              |
//! | 6      | 2    | `height` (u16)             |
//! | 8      | rest | RGB8 rows, top row first, or PNG bytes when enabled |

use serde::{Deserialize, Serialize};
use skewsplat::camera::Convention;

pub const HEADER_LEN: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderRequest {
    /// Camera-to-world matrix, row-major.
    pub c2w: [f64; 16],
    pub convention: Convention,
    /// Horizontal field of view in radians.
    pub fov_x: f64,
    pub width: u32,
    pub height: u32,
    pub frame_id: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    TooLarge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub code: ErrorCode,
    pub message: String,
    /// Echoed when the request was parsed far enough to read it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_id: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameHeader {
    pub frame_id: u32,
    pub width: u16,
    pub height: u16,
}

impl FrameHeader {
    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&self.frame_id.to_le_bytes());
        b[4..6].copy_from_slice(&self.width.to_le_bytes());
        b[6..8].copy_from_slice(&self.height.to_le_bytes());
        b
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        if bytes.len() < HEADER_LEN {
            return None;
        }
        Some(Self {
            frame_id: u32::from_le_bytes(bytes[0..4].try_into().ok()?),
            width: u16::from_le_bytes(bytes[4..6].try_into().ok()?),
            height: u16::from_le_bytes(bytes[6..8].try_into().ok()?),
        })
    }
}

/// Header followed by `payload`.
pub fn encode_frame(header: FrameHeader, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&header.encode());
    out.extend_from_slice(payload);
    out
}

/// Splits a frame message; for raw frames the payload must be exactly
/// `width · height · 3` bytes.
pub fn decode_raw_frame(bytes: &[u8]) -> Option<(FrameHeader, &[u8])> {
    let h = FrameHeader::decode(bytes)?;
    let payload = &bytes[HEADER_LEN..];
    (payload.len() == h.width as usize * h.height as usize * 3).then_some((h, payload))
}
