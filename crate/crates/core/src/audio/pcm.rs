//! In-memory PCM audio: 16-bit signed samples plus a sample rate.

use serde::{Deserialize, Serialize};

/// Mono 16-bit PCM. All pipeline stages exchange audio in this form; stereo
/// is folded or rejected at the WAV boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcmBuffer {
    samples: Vec<i16>,
    sample_rate: u32,
}

impl PcmBuffer {
    pub fn new(samples: Vec<i16>, sample_rate: u32) -> Self {
        assert!(sample_rate > 0, "sample rate must be positive");
        Self { samples, sample_rate }
    }

    pub fn empty(sample_rate: u32) -> Self {
        Self::new(Vec::new(), sample_rate)
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [i16] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<i16> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn truncate(&mut self, n_samples: usize) {
        self.samples.truncate(n_samples);
    }

    pub fn extend_from(&mut self, other: &PcmBuffer) {
        assert_eq!(self.sample_rate, other.sample_rate, "sample rate mismatch");
        self.samples.extend_from_slice(&other.samples);
    }

    /// Root-mean-square amplitude in raw sample units.
    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.samples.iter().map(|&s| (s as f64) * (s as f64)).sum();
        (sum / self.samples.len() as f64).sqrt()
    }

    /// Apply a linear gain, saturating at the i16 limits.
    pub fn apply_gain(&mut self, gain: f64) {
        for s in &mut self.samples {
            let v = (*s as f64 * gain).round();
            *s = v.clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        }
    }
}

/// Signal-to-noise ratio in dB of `decoded` against `reference`.
/// Returns +inf for a perfect match.
pub fn snr_db(reference: &[i16], decoded: &[i16]) -> f64 {
    assert_eq!(reference.len(), decoded.len(), "snr inputs must align");
    let mut signal = 0.0f64;
    let mut noise = 0.0f64;
    for (&r, &d) in reference.iter().zip(decoded) {
        let rf = r as f64;
        let ef = rf - d as f64;
        signal += rf * rf;
        noise += ef * ef;
    }
    if noise == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (signal / noise).log10()
    }
}
