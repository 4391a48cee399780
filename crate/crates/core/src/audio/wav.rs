//! Minimal RIFF/WAVE reader and writer for 16-bit PCM.
//!
//! The reader tolerates extra chunks (LIST, fact, cue) by skipping them and
//! accepts mono or stereo; anything that is not integer PCM at 16 bits per
//! sample is rejected rather than misread.

use std::path::Path;

use crate::audio::pcm::PcmBuffer;
use crate::audio::AudioError;

/// What to do with two-channel files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StereoPolicy {
    /// Refuse stereo input. The pipeline is mono end to end, so silent
    /// downmixing is opt-in.
    #[default]
    Reject,
    /// Average the two channels into one.
    Downmix,
}

pub fn read_wav(path: &Path, policy: StereoPolicy) -> Result<PcmBuffer, AudioError> {
    let bytes = std::fs::read(path)?;
    parse_wav(&bytes, policy)
}

pub fn write_wav(path: &Path, pcm: &PcmBuffer) -> Result<(), AudioError> {
    std::fs::write(path, encode_wav(pcm))?;
    Ok(())
}

pub fn parse_wav(bytes: &[u8], policy: StereoPolicy) -> Result<PcmBuffer, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::NotWave("missing RIFF/WAVE header".into()));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // format, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_end = pos + 8 + size;
        if body_end > bytes.len() {
            return Err(AudioError::NotWave(format!(
                "chunk {:?} overruns file",
                String::from_utf8_lossy(id)
            )));
        }
        let body = &bytes[pos + 8..body_end];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(AudioError::NotWave("fmt chunk too short".into()));
                }
                fmt = Some((
                    u16::from_le_bytes(body[0..2].try_into().unwrap()),
                    u16::from_le_bytes(body[2..4].try_into().unwrap()),
                    u32::from_le_bytes(body[4..8].try_into().unwrap()),
                    u16::from_le_bytes(body[14..16].try_into().unwrap()),
                ));
            }
            b"data" => data = Some(body),
            _ => {} // LIST, fact, cue and friends carry no audio
        }
        // Chunk bodies are word-aligned; odd sizes carry one pad byte.
        pos = body_end + size % 2;
    }

    let (format, channels, rate, bits) =
        fmt.ok_or_else(|| AudioError::NotWave("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| AudioError::NotWave("no data chunk".into()))?;

    if format != 1 {
        return Err(AudioError::UnsupportedWav(format!(
            "format tag {format}, only integer PCM (1) is supported"
        )));
    }
    if bits != 16 {
        return Err(AudioError::UnsupportedWav(format!("{bits}-bit samples, expected 16")));
    }
    if rate == 0 {
        return Err(AudioError::UnsupportedWav("zero sample rate".into()));
    }

    let frames: Vec<i16> = data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]))
        .collect();

    let samples = match channels {
        1 => frames,
        2 => match policy {
            StereoPolicy::Reject => return Err(AudioError::StereoRejected),
            StereoPolicy::Downmix => frames
                .chunks_exact(2)
                .map(|lr| (((lr[0] as i32) + (lr[1] as i32)) / 2) as i16)
                .collect(),
        },
        n => {
            return Err(AudioError::UnsupportedWav(format!(
                "{n} channels, expected mono or stereo"
            )))
        }
    };

    Ok(PcmBuffer::new(samples, rate))
}

pub fn encode_wav(pcm: &PcmBuffer) -> Vec<u8> {
    let data_len = pcm.len() * 2;
    let rate = pcm.sample_rate();
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // integer PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for s in pcm.samples() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}
