//! Audio I/O layer: PCM buffers, the 4-bit ADPCM codec used on the radio
//! link, WAV file handling, and integer-ratio resampling to 16 kHz.

pub mod adpcm;
pub mod pcm;
pub mod resample;
pub mod wav;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a RIFF/WAVE file: {0}")]
    NotWave(String),
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedWav(String),
    #[error("stereo input rejected (policy is Reject); pass StereoPolicy::Downmix to fold channels")]
    StereoRejected,
    #[error("unsupported sample rate {0} Hz: resampler only converts integer multiples of 16000")]
    UnsupportedRate(u32),
    #[error("truncated ADPCM stream: {0}")]
    TruncatedStream(String),
    #[error("corrupt ADPCM block: {0}")]
    CorruptBlock(String),
}
