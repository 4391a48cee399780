//! Emulated earpiece: operating states with their current draws, the
//! battery energy ledger, and the microphone timeline that scripts what
//! the device "hears" during a scenario. The live device behavior (wake
//! loop, chunk streaming, playback) runs as an agent inside [`crate::sim`].

pub mod mic;
pub mod power;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("invalid power profile: {0}")]
    InvalidProfile(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("mic timeline conflict: {0}")]
    TimelineOverlap(String),
}
