//! Emulated smartphone edge service: utterance endpointing on the decoded
//! query stream, deterministic table-driven stand-ins for ASR, LLM, VLM,
//! and TTS, the seven-stage query pipeline, and latency reporting.

pub mod endpoint;
pub mod pipeline;
pub mod report;
pub mod stubs;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EdgeError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid endpoint config: {0}")]
    InvalidEndpointConfig(String),
    #[error("latency report needs at least one query record")]
    NoRecords,
    #[error("photo required but not provided after request")]
    MissingPhoto,
    #[error("invalid stub table: {0}")]
    BadStubTable(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
