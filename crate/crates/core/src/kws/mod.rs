//! Keyword spotting: a small 1-D CNN over MFCC windows, its training loop,
//! the INT8 deployment path, the streaming wake decision logic, and a
//! resource profile for the target microcontroller budget.

pub mod detect;
pub mod format;
pub mod model;
pub mod profile;
pub mod quant;
pub mod train;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KwsError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file is not KWS1 format: {0}")]
    BadFormat(String),
    #[error("model file flavor mismatch: expected {expected}, found {found}")]
    FlavorMismatch { expected: &'static str, found: String },
    #[error("training set has {0} clips, need at least {1}")]
    TooFewClips(usize, usize),
    #[error("training set is missing class {0}")]
    MissingClass(&'static str),
    #[error("feature extraction failed: {0}")]
    Features(#[from] crate::dsp::DspError),
}
