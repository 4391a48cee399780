//! Scripted microphone input. A timeline places clips at explicit offsets
//! or back to back, refuses overlaps, and renders to one contiguous
//! 16 kHz stream with silence filling the gaps.

use crate::audio::pcm::PcmBuffer;
use crate::synth::SAMPLE_RATE;

use super::DeviceError;

#[derive(Debug, Clone)]
struct Placed {
    start: usize,
    samples: Vec<i16>,
    label: String,
}

#[derive(Debug, Default)]
pub struct MicTimeline {
    entries: Vec<Placed>,
    /// End of the last sequentially placed entry.
    cursor: usize,
}

impl MicTimeline {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append silence at the cursor.
    pub fn silence(mut self, seconds: f64) -> Self {
        self.cursor += (seconds * SAMPLE_RATE as f64).round() as usize;
        self
    }

    /// Append a clip at the cursor.
    pub fn then(self, label: &str, pcm: &PcmBuffer) -> Self {
        let at = self.cursor;
        self.place_at_sample(at, label, pcm)
    }

    /// Place a clip at an absolute offset in seconds.
    pub fn at(self, seconds: f64, label: &str, pcm: &PcmBuffer) -> Self {
        let at = (seconds * SAMPLE_RATE as f64).round() as usize;
        self.place_at_sample(at, label, pcm)
    }

    fn place_at_sample(mut self, start: usize, label: &str, pcm: &PcmBuffer) -> Self {
        assert_eq!(pcm.sample_rate(), SAMPLE_RATE, "timeline clips must be 16 kHz");
        self.entries.push(Placed {
            start,
            samples: pcm.samples().to_vec(),
            label: label.to_string(),
        });
        self.cursor = self.cursor.max(start + pcm.len());
        self
    }

    /// Validate and render the stream. Entries must not overlap; gaps
    /// become silence.
    pub fn build(mut self) -> Result<PcmBuffer, DeviceError> {
        self.entries.sort_by_key(|e| e.start);
        for pair in self.entries.windows(2) {
            let end = pair[0].start + pair[0].samples.len();
            if pair[1].start < end {
                return Err(DeviceError::TimelineOverlap(format!(
                    "{:?} starting at sample {} overlaps {:?} ending at {}",
                    pair[1].label, pair[1].start, pair[0].label, end
                )));
            }
        }
        let total = self
            .entries
            .last()
            .map(|e| e.start + e.samples.len())
            .unwrap_or(0)
            .max(self.cursor);
        let mut samples = vec![0i16; total];
        for e in &self.entries {
            samples[e.start..e.start + e.samples.len()].copy_from_slice(&e.samples);
        }
        Ok(PcmBuffer::new(samples, SAMPLE_RATE))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn silence_then_clip_concatenates() {
        let clip = synth::sine(440.0, 0.25, 0.5, SAMPLE_RATE);
        let stream = MicTimeline::new().silence(1.0).then("tone", &clip).build().unwrap();
        assert_eq!(stream.len(), 16000 + clip.len());
        assert!(stream.samples()[..16000].iter().all(|&s| s == 0), "leading second is silent");
        assert_eq!(&stream.samples()[16000..], &clip.samples()[..], "clip follows the silence");
    }

    #[test]
    fn empty_timeline_builds_an_empty_stream() {
        let stream = MicTimeline::new().build().unwrap();
        assert_eq!(stream.len(), 0);
    }

    #[test]
    fn absolute_placement_leaves_a_silent_gap() {
        let clip = synth::sine(300.0, 0.3, 0.1, SAMPLE_RATE);
        let stream = MicTimeline::new().at(2.0, "late", &clip).build().unwrap();
        assert_eq!(stream.len(), 32000 + clip.len());
        assert!(stream.samples()[..32000].iter().all(|&s| s == 0));
    }

    #[test]
    fn overlapping_entries_are_rejected_with_both_labels() {
        let clip = synth::sine(440.0, 0.4, 1.0, SAMPLE_RATE);
        let err = MicTimeline::new()
            .at(0.0, "first", &clip)
            .at(0.5, "second", &clip)
            .build()
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("first") && msg.contains("second"), "error names both clips: {msg}");
    }

    #[test]
    fn trailing_silence_extends_the_stream() {
        let clip = synth::sine(440.0, 0.5, 0.4, SAMPLE_RATE);
        let stream = MicTimeline::new().then("tone", &clip).silence(2.0).build().unwrap();
        assert_eq!(stream.len(), clip.len() + 32000, "trailing silence is part of the stream");
    }
}
