//! Streaming wake decision logic: a sliding one-second window scored every
//! half second, exponential smoothing over window posteriors, a fixed
//! threshold, and a suppression window after each event so one utterance
//! cannot fire twice.

use serde::{Deserialize, Serialize};

use crate::audio::pcm::PcmBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub window_s: f64,
    pub stride_s: f64,
    pub threshold: f64,
    /// Weight of the newest posterior in the exponential moving average.
    pub smoothing: f64,
    pub suppression_s: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            window_s: 1.0,
            stride_s: 0.5,
            threshold: 0.43,
            smoothing: 0.5,
            suppression_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    /// Start of the window that crossed the threshold.
    pub t_s: f64,
    /// Smoothed posterior at the moment of the decision.
    pub score: f64,
}

/// Stateful decision logic fed one window posterior per stride. Kept free of
/// feature extraction so it can be unit tested with synthetic posteriors and
/// reused by the device simulation.
#[derive(Debug, Clone)]
pub struct StreamingDetector {
    cfg: DetectorConfig,
    ema: Option<f64>,
    suppressed_until_s: f64,
}

impl StreamingDetector {
    pub fn new(cfg: DetectorConfig) -> Self {
        assert!(cfg.window_s > 0.0 && cfg.stride_s > 0.0, "window and stride must be positive");
        assert!((0.0..=1.0).contains(&cfg.smoothing), "smoothing is a convex weight");
        Self { cfg, ema: None, suppressed_until_s: f64::NEG_INFINITY }
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    /// Feed the wake posterior for the window starting at `window_start_s`.
    ///
    /// Windows inside the suppression span are skipped entirely and clear
    /// the average: after an event the detector re-arms fresh, so the decayed
    /// tail of a detected utterance cannot re-trigger at the suppression
    /// boundary.
    ///
    /// The average warms up from rest: the first window after construction,
    /// a reset, or a suppression skip contributes only its smoothed share.
    /// A moderate one-off spike is discounted while a decisive posterior
    /// still fires on its first window.
    pub fn observe(&mut self, window_start_s: f64, posterior: f64) -> Option<DetectionEvent> {
        if window_start_s < self.suppressed_until_s {
            self.ema = None;
            return None;
        }
        let s = match self.ema {
            None => self.cfg.smoothing * posterior,
            Some(prev) => self.cfg.smoothing * posterior + (1.0 - self.cfg.smoothing) * prev,
        };
        self.ema = Some(s);
        if s >= self.cfg.threshold {
            self.ema = None;
            self.suppressed_until_s = window_start_s + self.cfg.suppression_s;
            Some(DetectionEvent { t_s: window_start_s, score: s })
        } else {
            None
        }
    }

    pub fn reset(&mut self) {
        self.ema = None;
        self.suppressed_until_s = f64::NEG_INFINITY;
    }
}

/// Run the detector over a whole recording. `score` maps a one-window PCM
/// slice (zero-padded at the tail) to a wake posterior.
pub fn detect_stream(
    pcm: &PcmBuffer,
    cfg: DetectorConfig,
    mut score: impl FnMut(&PcmBuffer) -> f64,
) -> Vec<DetectionEvent> {
    let rate = pcm.sample_rate() as f64;
    let win = (cfg.window_s * rate).round() as usize;
    let stride = (cfg.stride_s * rate).round() as usize;
    let mut detector = StreamingDetector::new(cfg);
    let mut events = Vec::new();
    let mut start = 0usize;
    while start < pcm.len() {
        let end = (start + win).min(pcm.len());
        let window = PcmBuffer::new(pcm.samples()[start..end].to_vec(), pcm.sample_rate());
        if let Some(ev) = detector.observe(start as f64 / rate, score(&window)) {
            events.push(ev);
        }
        start += stride;
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;

    fn detector() -> StreamingDetector {
        StreamingDetector::new(DetectorConfig::default())
    }

    #[test]
    fn quiet_stream_never_fires() {
        let mut d = detector();
        for i in 0..100 {
            assert!(d.observe(i as f64 * 0.5, 0.02).is_none());
        }
    }

    #[test]
    fn single_strong_window_fires_fresh() {
        let mut d = detector();
        assert!(d.observe(0.0, 0.01).is_none());
        let ev = d.observe(0.5, 0.95);
        // Warm-up: EMA = 0.5 * 0.01 = 0.005, then 0.5 * 0.95 + 0.5 * 0.005.
        let ev = ev.expect("strong window should fire through the EMA");
        assert!((ev.score - 0.4775).abs() < 1e-12);
        assert_eq!(ev.t_s, 0.5);
    }

    #[test]
    fn cold_spike_is_discounted_but_persistence_fires() {
        let mut d = detector();
        // 0.58 from rest averages to 0.29: a lone noisy window stays quiet.
        assert!(d.observe(0.0, 0.58).is_none());
        // The same posterior sustained crosses on the second window.
        let ev = d.observe(0.5, 0.58).expect("sustained posterior fires");
        assert!((ev.score - 0.435).abs() < 1e-12);
    }

    #[test]
    fn smoothing_requires_persistence_near_threshold() {
        let mut d = detector();
        assert!(d.observe(0.0, 0.0).is_none());
        // 0.42 alone never crosses 0.43 regardless of repetition.
        for i in 1..10 {
            assert!(d.observe(i as f64 * 0.5, 0.42).is_none());
        }
    }

    #[test]
    fn suppression_blocks_by_time_not_count() {
        let mut d = detector();
        let ev = d.observe(0.0, 0.9).expect("first window fires");
        assert_eq!(ev.t_s, 0.0);
        // Inside the 1 s suppression span: skipped even at full confidence.
        assert!(d.observe(0.5, 1.0).is_none());
        // At the boundary the detector is re-armed but fresh; a weak tail
        // posterior must not fire on EMA memory.
        assert!(d.observe(1.0, 0.3).is_none());
        // A genuine second utterance fires again.
        assert!(d.observe(1.5, 0.9).is_some());
    }

    #[test]
    fn detect_stream_walks_stride_grid() {
        let pcm = crate::synth::silence(3.0, 16_000);
        let mut seen = Vec::new();
        let events = detect_stream(&pcm, DetectorConfig::default(), |w| {
            seen.push(w.len());
            0.0
        });
        assert!(events.is_empty());
        // Windows start at 0, 0.5, ... 2.5 s; the final two are short tails.
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], 16_000);
        assert_eq!(seen[5], 8_000);
    }

    #[test]
    fn reset_clears_suppression() {
        let mut d = detector();
        d.observe(0.0, 0.9).unwrap();
        d.reset();
        assert!(d.observe(0.1, 0.9).is_some(), "reset must clear suppression");
    }
}
