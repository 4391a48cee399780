//! Feature extraction: framing, mel filterbank, and MFCC windows for the
//! keyword spotter.

pub mod features;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("input has {got} samples but the window holds {max}; pass at most one window")]
    WindowOverrun { got: usize, max: usize },
    #[error("input sample rate {got} Hz does not match configured {want} Hz")]
    RateMismatch { got: u32, want: u32 },
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
}
