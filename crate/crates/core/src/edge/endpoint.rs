//! Energy-based utterance endpointing.
//!
//! The detector consumes the decoded query stream in fixed hops and fires
//! once the trailing quiet run reaches the hangover length. It is
//! single-shot: after a boundary fires, further input is ignored until
//! [`EndpointDetector::reset`].

use crate::EdgeError;

/// Endpointing parameters. Defaults: 20 ms hops at 16 kHz, 700 ms hangover,
/// quiet below 0.01 RMS of full scale.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EndpointConfig {
    pub sample_rate: u32,
    pub hop_samples: usize,
    pub hangover_ms: u32,
    pub energy_threshold: f64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self { sample_rate: 16_000, hop_samples: 320, hangover_ms: 700, energy_threshold: 0.01 }
    }
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<(), EdgeError> {
        if self.sample_rate == 0 || self.hop_samples == 0 {
            return Err(EdgeError::InvalidEndpointConfig(
                "sample rate and hop size must be positive".into(),
            ));
        }
        if self.hangover_ms == 0 {
            return Err(EdgeError::InvalidEndpointConfig("hangover must be positive".into()));
        }
        if !(self.energy_threshold > 0.0 && self.energy_threshold < 1.0) {
            return Err(EdgeError::InvalidEndpointConfig(
                "energy threshold must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Number of consecutive quiet hops that closes an utterance.
    pub fn hangover_hops(&self) -> u64 {
        let hop_ms = self.hop_samples as f64 * 1000.0 / self.sample_rate as f64;
        (self.hangover_ms as f64 / hop_ms).ceil() as u64
    }
}

/// A detected utterance boundary, in samples since the start of the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Boundary {
    /// End of the hop at which the quiet run first reached the hangover.
    pub boundary_sample: u64,
    /// False when no hop before the boundary exceeded the energy threshold.
    pub has_speech: bool,
}

impl Boundary {
    /// Start of the closing quiet run, i.e. where audible content ended.
    pub fn speech_end_sample(&self, cfg: &EndpointConfig) -> u64 {
        let hangover = cfg.hangover_hops() * cfg.hop_samples as u64;
        self.boundary_sample.saturating_sub(hangover)
    }
}

/// Streaming endpoint detector over raw 16-bit samples.
#[derive(Debug)]
pub struct EndpointDetector {
    cfg: EndpointConfig,
    pending: Vec<i16>,
    hops_consumed: u64,
    quiet_hops: u64,
    voiced_seen: bool,
    fired: Option<Boundary>,
}

impl EndpointDetector {
    pub fn new(cfg: EndpointConfig) -> Result<Self, EdgeError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            pending: Vec::new(),
            hops_consumed: 0,
            quiet_hops: 0,
            voiced_seen: false,
            fired: None,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    pub fn boundary(&self) -> Option<Boundary> {
        self.fired
    }

    /// Rearm the detector for the next utterance.
    pub fn reset(&mut self) {
        self.pending.clear();
        self.hops_consumed = 0;
        self.quiet_hops = 0;
        self.voiced_seen = false;
        self.fired = None;
    }

    /// Close the utterance at the current position regardless of energy.
    /// Used when the device hits its streaming hard cap; idempotent once a
    /// boundary exists.
    pub fn force_close(&mut self) -> Boundary {
        if let Some(b) = self.fired {
            return b;
        }
        let consumed = self.hops_consumed * self.cfg.hop_samples as u64 + self.pending.len() as u64;
        let b = Boundary { boundary_sample: consumed, has_speech: self.voiced_seen };
        self.fired = Some(b);
        b
    }

    /// Feed decoded samples; returns the boundary the first time it fires.
    pub fn push(&mut self, samples: &[i16]) -> Option<Boundary> {
        if self.fired.is_some() {
            return None;
        }
        self.pending.extend_from_slice(samples);
        let hop = self.cfg.hop_samples;
        while self.pending.len() >= hop {
            let chunk: Vec<i16> = self.pending.drain(..hop).collect();
            self.hops_consumed += 1;
            if hop_rms(&chunk) >= self.cfg.energy_threshold {
                self.voiced_seen = true;
                self.quiet_hops = 0;
            } else {
                self.quiet_hops += 1;
                if self.quiet_hops >= self.cfg.hangover_hops() {
                    let b = Boundary {
                        boundary_sample: self.hops_consumed * hop as u64,
                        has_speech: self.voiced_seen,
                    };
                    self.fired = Some(b);
                    return Some(b);
                }
            }
        }
        None
    }
}

fn hop_rms(chunk: &[i16]) -> f64 {
    let sum: f64 = chunk.iter().map(|&s| {
        let x = s as f64 / i16::MAX as f64;
        x * x
    }).sum();
    (sum / chunk.len() as f64).sqrt()
}
