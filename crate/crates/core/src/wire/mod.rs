//! Device to edge wire layer: CRC-sealed frame codec, the per-session
//! state machine spanning the provisioning and runtime channels, and the
//! receive-side jitter buffer.

pub mod crc;
pub mod frame;
pub mod jitter;
pub mod session;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("bad magic {0:02X?}")]
    BadMagic([u8; 2]),
    #[error("crc mismatch: frame says {expect:#010X}, computed {actual:#010X}")]
    BadCrc { expect: u32, actual: u32 },
    #[error("truncated frame: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("unknown frame type {0}")]
    UnknownFrameType(u8),
    #[error("payload of {0} bytes exceeds the u16 length field")]
    PayloadTooLarge(usize),
    #[error("{0} bytes after a complete frame")]
    TrailingBytes(usize),
}
