//! Scenario files: everything one end-to-end run needs, as a single JSON
//! document. Validation reports every bad field at once so a broken file
//! can be fixed in one pass.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::toy;
use crate::device::mic::MicTimeline;
use crate::kws::detect::DetectorConfig;
use crate::netsim::channel::{ChannelConfig, CoexistenceMode};
use crate::sim::SimError;
use crate::synth::{self, SAMPLE_RATE};
use crate::{PcmBuffer, PowerProfile};

/// One scripted sound on the microphone timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MicEvent {
    /// A synthesized wake-word utterance.
    WakeWord { at_s: f64, seed: u64 },
    /// A pure query tone; the edge recognizer keys on its frequency.
    Tone { at_s: f64, freq_hz: f64, duration_s: f64, amplitude: f64 },
    /// Broadband noise that must not wake the device.
    Noise { at_s: f64, duration_s: f64, amplitude: f64, seed: u64 },
}

impl MicEvent {
    pub fn at_s(&self) -> f64 {
        match *self {
            MicEvent::WakeWord { at_s, .. }
            | MicEvent::Tone { at_s, .. }
            | MicEvent::Noise { at_s, .. } => at_s,
        }
    }
}

/// A photo the device can "capture": id keys the scene description, the
/// byte count sizes the upload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhotoFixture {
    pub id: String,
    pub size_bytes: usize,
}

fn default_tail_silence_s() -> f64 {
    4.0
}
fn default_prebuffer_ms() -> u32 {
    300
}
fn default_photo_timeout_ms() -> u64 {
    5_000
}
fn default_inference_scale() -> f64 {
    1.0
}
fn default_reconnect_backoff_ms() -> u64 {
    500
}
fn default_duration_limit_s() -> f64 {
    60.0
}
fn default_stream_cap_s() -> f64 {
    10.0
}

/// A full run description. Model weights are not part of the scenario;
/// they come from [`crate::sim::SimAssets`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Seeds photo payload bytes; channel randomness uses `channel.seed`.
    pub seed: u64,
    pub mic: Vec<MicEvent>,
    #[serde(default = "default_tail_silence_s")]
    pub tail_silence_s: f64,
    #[serde(default)]
    pub photos: Vec<PhotoFixture>,
    pub channel: ChannelConfig,
    #[serde(default)]
    pub power: PowerProfile,
    #[serde(default)]
    pub detector: DetectorConfig,
    /// Playout buffer depth on the device speaker path.
    #[serde(default = "default_prebuffer_ms")]
    pub prebuffer_ms: u32,
    #[serde(default = "default_photo_timeout_ms")]
    pub photo_timeout_ms: u64,
    /// Multiplier on both inference stubs' latency, for budget experiments.
    #[serde(default = "default_inference_scale")]
    pub inference_scale: f64,
    /// Scripted runtime-channel drops.
    #[serde(default)]
    pub drops_at_s: Vec<f64>,
    #[serde(default = "default_reconnect_backoff_ms")]
    pub reconnect_backoff_ms: u64,
    #[serde(default = "default_duration_limit_s")]
    pub duration_limit_s: f64,
    /// Longest one utterance may stream before the device force-closes it.
    #[serde(default = "default_stream_cap_s")]
    pub stream_cap_s: f64,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::InvalidScenario(vec![format!("{}: {e}", path.display())]))?;
        let scenario: Scenario = serde_json::from_str(&text)
            .map_err(|e| SimError::InvalidScenario(vec![format!("parse error: {e}")]))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn save(&self, path: &Path) -> Result<(), SimError> {
        let text = serde_json::to_string_pretty(self).expect("scenario serializes");
        std::fs::write(path, text + "\n").map_err(SimError::Io)
    }

    /// Check every field and collect all diagnostics before failing.
    pub fn validate(&self) -> Result<(), SimError> {
        let mut problems = Vec::new();
        if self.name.trim().is_empty() {
            problems.push("name: must not be empty".to_string());
        }
        for (i, ev) in self.mic.iter().enumerate() {
            let at = ev.at_s();
            if !at.is_finite() || at < 0.0 {
                problems.push(format!("mic[{i}].at_s: {at} must be finite and non-negative"));
            }
            match *ev {
                MicEvent::Tone { freq_hz, duration_s, amplitude, .. } => {
                    if !(50.0..=7_900.0).contains(&freq_hz) {
                        problems.push(format!("mic[{i}].freq_hz: {freq_hz} outside 50..=7900"));
                    }
                    if !(duration_s > 0.0 && duration_s.is_finite()) {
                        problems.push(format!("mic[{i}].duration_s: {duration_s} must be positive"));
                    }
                    if !(amplitude > 0.0 && amplitude <= 1.0) {
                        problems.push(format!("mic[{i}].amplitude: {amplitude} outside (0, 1]"));
                    }
                }
                MicEvent::Noise { duration_s, amplitude, .. } => {
                    if !(duration_s > 0.0 && duration_s.is_finite()) {
                        problems.push(format!("mic[{i}].duration_s: {duration_s} must be positive"));
                    }
                    if !(amplitude > 0.0 && amplitude <= 1.0) {
                        problems.push(format!("mic[{i}].amplitude: {amplitude} outside (0, 1]"));
                    }
                }
                MicEvent::WakeWord { .. } => {}
            }
        }
        if !(self.tail_silence_s >= 0.0 && self.tail_silence_s.is_finite()) {
            problems.push(format!("tail_silence_s: {} must be non-negative", self.tail_silence_s));
        }
        for (i, p) in self.photos.iter().enumerate() {
            if p.id.trim().is_empty() {
                problems.push(format!("photos[{i}].id: must not be empty"));
            }
            if p.size_bytes == 0 || p.size_bytes > 60_000 {
                problems.push(format!(
                    "photos[{i}].size_bytes: {} outside 1..=60000 (one data frame)",
                    p.size_bytes
                ));
            }
            if self.photos.iter().filter(|q| q.id == p.id).count() > 1 {
                problems.push(format!("photos[{i}].id: duplicate id {:?}", p.id));
            }
        }
        if let Err(e) = self.channel.validate() {
            problems.push(format!("channel: {e}"));
        }
        if let Err(e) = self.power.validate() {
            problems.push(format!("power: {e}"));
        }
        if self.prebuffer_ms > 5_000 {
            problems.push(format!("prebuffer_ms: {} above the 5000 ms cap", self.prebuffer_ms));
        }
        if self.photo_timeout_ms < 100 {
            problems.push(format!("photo_timeout_ms: {} below the 100 ms floor", self.photo_timeout_ms));
        }
        if !(self.inference_scale > 0.0 && self.inference_scale.is_finite()) {
            problems.push(format!("inference_scale: {} must be positive", self.inference_scale));
        }
        for (i, t) in self.drops_at_s.iter().enumerate() {
            if !t.is_finite() || *t < 0.0 {
                problems.push(format!("drops_at_s[{i}]: {t} must be finite and non-negative"));
            }
        }
        if self.reconnect_backoff_ms < 10 {
            problems.push(format!(
                "reconnect_backoff_ms: {} below the 10 ms floor",
                self.reconnect_backoff_ms
            ));
        }
        if !(self.duration_limit_s > 0.0 && self.duration_limit_s.is_finite()) {
            problems.push(format!("duration_limit_s: {} must be positive", self.duration_limit_s));
        }
        if !(self.stream_cap_s > 0.0 && self.stream_cap_s <= 60.0) {
            problems.push(format!("stream_cap_s: {} outside (0, 60]", self.stream_cap_s));
        }
        // Overlap detection comes free with the timeline builder.
        if problems.is_empty() {
            if let Err(e) = self.render_mic() {
                problems.push(format!("mic: {e}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidScenario(problems))
        }
    }

    /// Render the scripted microphone input to one contiguous stream.
    pub fn render_mic(&self) -> Result<PcmBuffer, SimError> {
        let mut timeline = MicTimeline::new();
        for (i, ev) in self.mic.iter().enumerate() {
            let (at, label, clip) = match *ev {
                MicEvent::WakeWord { at_s, seed } => {
                    (at_s, format!("wake[{i}]"), toy::wake_word_clip(seed))
                }
                MicEvent::Tone { at_s, freq_hz, duration_s, amplitude } => (
                    at_s,
                    format!("tone[{i}]"),
                    synth::sine(freq_hz, amplitude, duration_s, SAMPLE_RATE),
                ),
                MicEvent::Noise { at_s, duration_s, amplitude, seed } => (
                    at_s,
                    format!("noise[{i}]"),
                    synth::white_noise(amplitude, duration_s, SAMPLE_RATE, seed),
                ),
            };
            timeline = timeline.at(at, &label, &clip);
        }
        timeline
            .silence(self.tail_silence_s)
            .build()
            .map_err(|e| SimError::InvalidScenario(vec![format!("mic timeline: {e}")]))
    }

    /// Deterministic payload bytes for a photo fixture.
    pub fn photo_bytes(&self, fixture: &PhotoFixture) -> Vec<u8> {
        let mut state = self.seed ^ 0x9E37_79B9_7F4A_7C15;
        for b in fixture.id.bytes() {
            state = state.wrapping_mul(0x100_0000_01b3).wrapping_add(b as u64);
        }
        let mut out = Vec::with_capacity(fixture.size_bytes);
        while out.len() < fixture.size_bytes {
            // splitmix64 stream, eight bytes at a time
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            out.extend_from_slice(&z.to_le_bytes());
        }
        out.truncate(fixture.size_bytes);
        out
    }

    /// Three spoken queries covering all three pathways over a mildly
    /// imperfect link: a photo command, a visual question, and chit-chat.
    pub fn walkthrough() -> Self {
        Scenario {
            name: "walkthrough".to_string(),
            seed: 11,
            mic: vec![
                MicEvent::WakeWord { at_s: 1.0, seed: 101 },
                MicEvent::Tone { at_s: 2.2, freq_hz: 500.0, duration_s: 1.0, amplitude: 0.5 },
                MicEvent::WakeWord { at_s: 11.0, seed: 102 },
                MicEvent::Tone { at_s: 12.2, freq_hz: 800.0, duration_s: 1.0, amplitude: 0.5 },
                MicEvent::WakeWord { at_s: 21.0, seed: 103 },
                MicEvent::Tone { at_s: 22.2, freq_hz: 1_100.0, duration_s: 1.0, amplitude: 0.5 },
            ],
            tail_silence_s: 6.0,
            photos: vec![
                PhotoFixture { id: "desk".to_string(), size_bytes: 18_000 },
                PhotoFixture { id: "table".to_string(), size_bytes: 20_000 },
            ],
            channel: ChannelConfig {
                base_latency_ms: 20.0,
                jitter_ms: 30.0,
                loss_prob: 0.002,
                reorder_prob: 0.002,
                bandwidth_kbps: 1_000.0,
                coexistence_mode: CoexistenceMode::Off,
                seed: 40,
                ..ChannelConfig::default()
            },
            power: PowerProfile::default(),
            detector: DetectorConfig::default(),
            prebuffer_ms: 300,
            photo_timeout_ms: 5_000,
            inference_scale: 1.0,
            drops_at_s: vec![],
            reconnect_backoff_ms: 500,
            duration_limit_s: 60.0,
            stream_cap_s: 10.0,
        }
    }

    /// One long conversational answer streamed while the stall schedule of
    /// the given coexistence mode is active.
    pub fn coexistence(mode: CoexistenceMode) -> Self {
        let name = match mode {
            CoexistenceMode::Off => "coexistence_off",
            CoexistenceMode::Naive => "coexistence_naive",
            CoexistenceMode::Prioritized => "coexistence_prioritized",
        };
        Scenario {
            name: name.to_string(),
            seed: 23,
            mic: vec![
                MicEvent::WakeWord { at_s: 1.0, seed: 201 },
                MicEvent::Tone { at_s: 2.2, freq_hz: 1_100.0, duration_s: 1.0, amplitude: 0.5 },
            ],
            tail_silence_s: 6.0,
            photos: vec![],
            channel: ChannelConfig {
                base_latency_ms: 20.0,
                jitter_ms: 60.0,
                loss_prob: 0.01,
                reorder_prob: 0.01,
                bandwidth_kbps: 1_000.0,
                coexistence_mode: mode,
                seed: 77,
                // The paper-symptom case: stalls longer than the playout
                // buffer whenever both radios are busy.
                stall_period_ms: 1_000.0,
                stall_duration_ms: 400.0,
                ..ChannelConfig::default()
            },
            power: PowerProfile::default(),
            detector: DetectorConfig::default(),
            prebuffer_ms: 300,
            photo_timeout_ms: 5_000,
            inference_scale: 1.0,
            drops_at_s: vec![],
            reconnect_backoff_ms: 500,
            duration_limit_s: 20.0,
            stream_cap_s: 10.0,
        }
    }

    /// No queries at all: a quiet day for exercising the energy ledger.
    pub fn power_schedule() -> Self {
        Scenario {
            name: "power_schedule".to_string(),
            seed: 5,
            mic: vec![MicEvent::Noise { at_s: 2.0, duration_s: 2.0, amplitude: 0.08, seed: 9 }],
            tail_silence_s: 8.0,
            photos: vec![],
            channel: ChannelConfig { seed: 13, ..ChannelConfig::default() },
            power: PowerProfile::default(),
            detector: DetectorConfig::default(),
            prebuffer_ms: 300,
            photo_timeout_ms: 5_000,
            inference_scale: 1.0,
            drops_at_s: vec![],
            reconnect_backoff_ms: 500,
            duration_limit_s: 30.0,
            stream_cap_s: 10.0,
        }
    }

    /// Walkthrough variant with a scripted mid-stream drop and reconnect.
    pub fn drop_and_reconnect() -> Self {
        let mut s = Scenario::walkthrough();
        s.name = "drop_reconnect".to_string();
        // Drop while the second utterance is streaming; the third query
        // must still succeed after the reconnect.
        s.drops_at_s = vec![13.0];
        s
    }
}
