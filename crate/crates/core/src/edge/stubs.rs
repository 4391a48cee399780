//! Table-driven stand-ins for the heavy edge models.
//!
//! Each stub maps an input key to a canned output with a deterministic
//! latency model, so pipeline timing is reproducible run to run. Query
//! audio is keyed by its dominant tone ("tone:500"), photos by their id
//! ("photo:desk"), and text models by the exact transcript.

use std::collections::BTreeMap;
use std::path::Path;

use crate::{EdgeError, PcmBuffer, synth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubKind {
    Asr,
    Llm,
    Vlm,
    Tts,
}

/// Deterministic service time for one stub invocation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyModel {
    Fixed { ms: f64 },
    PerToken { base_ms: f64, per_token_ms: f64 },
}

impl LatencyModel {
    /// Latency for a response of `tokens` whitespace-separated tokens.
    pub fn latency_ms(&self, tokens: usize) -> f64 {
        match *self {
            LatencyModel::Fixed { ms } => ms,
            LatencyModel::PerToken { base_ms, per_token_ms } => {
                base_ms + per_token_ms * tokens.max(1) as f64
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StubResponse {
    pub output: String,
    pub latency_ms: f64,
}

/// One emulated model: a lookup table plus a latency model.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct InferenceStub {
    pub kind: StubKind,
    pub latency: LatencyModel,
    /// Reply when no table entry matches; `None` means a miss yields nothing.
    #[serde(default)]
    pub default_output: Option<String>,
    pub table: BTreeMap<String, String>,
}

impl InferenceStub {
    pub fn new(kind: StubKind, latency: LatencyModel) -> Self {
        Self { kind, latency, default_output: None, table: BTreeMap::new() }
    }

    pub fn with_entry(mut self, key: &str, output: &str) -> Self {
        self.table.insert(key.to_string(), output.to_string());
        self
    }

    pub fn with_default(mut self, output: &str) -> Self {
        self.default_output = Some(output.to_string());
        self
    }

    pub fn load(path: &Path) -> Result<Self, EdgeError> {
        let text = std::fs::read_to_string(path)?;
        let stub: Self = serde_json::from_str(&text)?;
        stub.validate()?;
        Ok(stub)
    }

    pub fn save(&self, path: &Path) -> Result<(), EdgeError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), EdgeError> {
        let ok = match self.latency {
            LatencyModel::Fixed { ms } => ms >= 0.0 && ms.is_finite(),
            LatencyModel::PerToken { base_ms, per_token_ms } => {
                base_ms >= 0.0 && per_token_ms >= 0.0 && base_ms.is_finite() && per_token_ms.is_finite()
            }
        };
        if !ok {
            return Err(EdgeError::BadStubTable("latency terms must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Look up `key`; falls back to the default output when configured.
    pub fn invoke(&self, key: &str) -> Option<StubResponse> {
        let output = self.table.get(key).or(self.default_output.as_ref())?;
        let tokens = output.split_whitespace().count();
        Some(StubResponse { output: output.clone(), latency_ms: self.latency.latency_ms(tokens) })
    }
}

/// Key query audio by its dominant tone, rounded to the nearest 100 Hz.
///
/// The clip is segmented into voiced regions separated by at least 100 ms
/// of quiet, and only the last region is measured: a query utterance is the
/// final thing said, so wake-word residue at the head of the stream and
/// silence on either side cannot dilute the estimate. Zero-crossing
/// counting is exact for the pure-tone query fixtures the device
/// synthesizes; anything near-silent keys as "silence".
pub fn asr_key_for(pcm: &PcmBuffer) -> String {
    const GATE: u16 = 655; // 2% of full scale
    let min_gap = pcm.sample_rate() as usize / 10; // 100 ms
    let samples = pcm.samples();

    // Walk backwards: skip trailing quiet, take the final voiced run, and
    // stop once the quiet gap before it reaches the segment separator.
    let Some(last) = samples.iter().rposition(|&s| s.unsigned_abs() >= GATE) else {
        return "silence".to_string();
    };
    let mut first = last;
    let mut quiet_run = 0usize;
    for i in (0..last).rev() {
        if samples[i].unsigned_abs() >= GATE {
            first = i;
            quiet_run = 0;
        } else {
            quiet_run += 1;
            if quiet_run >= min_gap {
                break;
            }
        }
    }

    let active = &samples[first..=last];
    if active.len() < 2 {
        return "silence".to_string();
    }
    let mut crossings = 0u64;
    for pair in active.windows(2) {
        if (pair[0] >= 0) != (pair[1] >= 0) {
            crossings += 1;
        }
    }
    let duration_s = active.len() as f64 / pcm.sample_rate() as f64;
    let freq = crossings as f64 / (2.0 * duration_s);
    let bucket = ((freq / 100.0).round() * 100.0) as u64;
    if bucket == 0 {
        return "silence".to_string();
    }
    format!("tone:{bucket}")
}

/// Synthesize a spoken-response waveform whose length scales with the text.
pub fn tts_waveform(text: &str, sample_rate: u32) -> PcmBuffer {
    let chars = text.chars().count().max(1);
    let duration_s = (0.3 + 0.035 * chars as f64).min(4.0);
    let mut seed = 0xcbf2_9ce4_8422_2325u64;
    for b in text.bytes() {
        seed ^= b as u64;
        seed = seed.wrapping_mul(0x1000_0000_01b3);
    }
    synth::speech_proxy(duration_s, sample_rate, seed)
}

/// ASR table covering the tone-keyed query fixtures.
pub fn default_asr_stub() -> InferenceStub {
    InferenceStub::new(StubKind::Asr, LatencyModel::Fixed { ms: 400.0 })
        .with_entry("tone:500", "take a photo")
        .with_entry("tone:800", "what's on this table?")
        .with_entry("tone:1100", "tell me something interesting")
}

/// Conversational replies keyed by exact transcript.
pub fn default_llm_stub() -> InferenceStub {
    InferenceStub::new(StubKind::Llm, LatencyModel::Fixed { ms: 1500.0 })
        .with_entry(
            "tell me something interesting",
            "octopuses have three hearts and two of them stop when they swim",
        )
        .with_entry("what is the capital of france", "the capital of france is paris")
        .with_default("i'm not sure, but i can look into that")
}

/// Scene descriptions keyed by photo id.
pub fn default_vlm_stub() -> InferenceStub {
    InferenceStub::new(StubKind::Vlm, LatencyModel::Fixed { ms: 1500.0 })
        .with_entry("photo:desk", "i can see a mug and a notebook on a wooden desk")
        .with_entry("photo:table", "there are two cups and a stack of papers on the table")
        .with_default("i can see a cluttered indoor scene")
}

/// TTS latency model; the waveform itself comes from [`tts_waveform`].
pub fn default_tts_stub() -> InferenceStub {
    InferenceStub::new(StubKind::Tts, LatencyModel::Fixed { ms: 300.0 })
}
