//! Simulated transport between device and edge: a channel model injecting
//! latency, jitter, loss, reordering, bandwidth serialization, and the
//! 2.4 GHz coexistence stall behavior. Everything runs on a virtual clock
//! in microseconds.

pub mod channel;

use serde::{Deserialize, Serialize};

/// Simulated time in microseconds since scenario start.
pub type SimTime = u64;

pub fn ms_to_us(ms: f64) -> SimTime {
    (ms * 1000.0).round() as SimTime
}

pub fn us_to_ms(us: SimTime) -> f64 {
    us as f64 / 1000.0
}

pub fn us_to_s(us: SimTime) -> f64 {
    us as f64 / 1_000_000.0
}

/// Every transport a scenario opens is recorded here, so a test can verify
/// that audio and photos leave the device only toward the paired edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    /// In-process simulated channel between the named endpoints.
    InProcess { name: String, from: String, to: String },
    /// Loopback TCP used by the demo server; never opened by the test
    /// suite.
    Tcp { addr: String },
}

#[derive(Debug, Default)]
pub struct TransportRegistry {
    records: Vec<TransportKind>,
}

impl TransportRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, kind: TransportKind) {
        self.records.push(kind);
    }

    pub fn records(&self) -> &[TransportKind] {
        &self.records
    }
}
