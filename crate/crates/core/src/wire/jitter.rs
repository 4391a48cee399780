//! Receive-side jitter buffer. Chunks arrive keyed by seq, possibly late,
//! duplicated, or never; playback starts only once the prebuffer is full
//! and then consumes sample-contiguous audio, zero-filling chunks that
//! still have not arrived when the cursor reaches them.
//!
//! Starvation (cursor passes everything buffered) is reported as an
//! underrun *event*: consecutive starved pops count once, re-armed when
//! audio flows again. Counters expose a conservation check: every accepted
//! input sample is either already played or still buffered, and total
//! output equals real samples plus concealed silence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone)]
pub struct JitterBufferConfig {
    pub prebuffer_ms: u32,
    pub sample_rate: u32,
    /// Samples per chunk; a missing seq conceals exactly this many.
    pub chunk_samples: usize,
}

impl Default for JitterBufferConfig {
    fn default() -> Self {
        Self { prebuffer_ms: 300, sample_rate: 16000, chunk_samples: 320 }
    }
}

/// Outcome of a pop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PopResult {
    /// Prebuffer not yet satisfied; no audio consumed.
    NotReady,
    /// Contiguous audio; concealed spans are zeros and counted.
    Audio(Vec<i16>),
    /// Cursor outran the buffer; nothing (or a partial tail) available.
    Underrun(Vec<i16>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JitterStats {
    pub accepted_samples: u64,
    pub duplicate_chunks: u64,
    pub late_chunks: u64,
    pub played_real_samples: u64,
    pub concealed_samples: u64,
    pub underrun_events: u64,
}

#[derive(Debug)]
pub struct JitterBuffer {
    cfg: JitterBufferConfig,
    chunks: BTreeMap<u32, Vec<i16>>,
    buffered_samples: usize,
    started: bool,
    /// Seq the cursor sits in, once started.
    cursor_seq: u32,
    /// Sample offset within cursor_seq.
    cursor_off: usize,
    starved: bool,
    stats: JitterStats,
}

impl JitterBuffer {
    pub fn new(cfg: JitterBufferConfig) -> Self {
        assert!(cfg.sample_rate > 0 && cfg.chunk_samples > 0, "degenerate config");
        Self {
            cfg,
            chunks: BTreeMap::new(),
            buffered_samples: 0,
            started: false,
            cursor_seq: 0,
            cursor_off: 0,
            starved: false,
            stats: JitterStats::default(),
        }
    }

    pub fn stats(&self) -> JitterStats {
        self.stats
    }

    pub fn buffered_samples(&self) -> usize {
        self.buffered_samples
    }

    pub fn buffered_ms(&self) -> f64 {
        self.buffered_samples as f64 * 1000.0 / self.cfg.sample_rate as f64
    }

    fn prebuffer_samples(&self) -> usize {
        (self.cfg.prebuffer_ms as u64 * self.cfg.sample_rate as u64 / 1000) as usize
    }

    /// Accept a chunk. Duplicates and chunks behind the play cursor are
    /// dropped (counted, never replayed).
    pub fn push(&mut self, seq: u32, samples: &[i16]) {
        if self.started && (seq < self.cursor_seq || (seq == self.cursor_seq && self.cursor_off > 0))
        {
            self.stats.late_chunks += 1;
            return;
        }
        if self.chunks.contains_key(&seq) {
            self.stats.duplicate_chunks += 1;
            return;
        }
        self.buffered_samples += samples.len();
        self.stats.accepted_samples += samples.len() as u64;
        self.chunks.insert(seq, samples.to_vec());
    }

    /// Pull `n` samples of playback audio.
    pub fn pop(&mut self, n: usize) -> PopResult {
        if !self.started {
            if self.buffered_samples < self.prebuffer_samples() {
                return PopResult::NotReady;
            }
            self.started = true;
            // Leading losses are skipped, not concealed: playback begins at
            // the first chunk that actually arrived.
            self.cursor_seq = *self.chunks.keys().next().expect("prebuffer met implies data");
            self.cursor_off = 0;
        }

        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let highest = match self.chunks.keys().next_back() {
                Some(&h) => h,
                None => break,
            };
            if self.cursor_seq > highest {
                break;
            }
            if let Some(chunk) = self.chunks.get(&self.cursor_seq) {
                let take = (n - out.len()).min(chunk.len() - self.cursor_off);
                out.extend_from_slice(&chunk[self.cursor_off..self.cursor_off + take]);
                self.cursor_off += take;
                self.stats.played_real_samples += take as u64;
                self.buffered_samples -= take;
                if self.cursor_off == chunk.len() {
                    self.chunks.remove(&self.cursor_seq);
                    self.cursor_seq += 1;
                    self.cursor_off = 0;
                }
            } else {
                // Chunk never arrived but a later one did: conceal it.
                let missing = self.cfg.chunk_samples - self.cursor_off;
                let take = (n - out.len()).min(missing);
                out.extend(std::iter::repeat_n(0i16, take));
                self.cursor_off += take;
                self.stats.concealed_samples += take as u64;
                if self.cursor_off == self.cfg.chunk_samples {
                    self.cursor_seq += 1;
                    self.cursor_off = 0;
                }
            }
        }

        if out.len() < n {
            if !self.starved {
                self.starved = true;
                self.stats.underrun_events += 1;
            }
            PopResult::Underrun(out)
        } else {
            self.starved = false;
            PopResult::Audio(out)
        }
    }

    /// Everything still buffered, gaps concealed, cursor advanced to the
    /// end. For draining after the sender finished.
    pub fn drain(&mut self) -> Vec<i16> {
        if !self.started {
            self.started = true;
            self.cursor_seq = match self.chunks.keys().next() {
                Some(&s) => s,
                None => return Vec::new(),
            };
            self.cursor_off = 0;
        }
        let mut out = Vec::with_capacity(self.buffered_samples);
        // Starving during an explicit drain is expected, not an underrun
        // event; only the terminal pop below can touch the counter.
        let events_before = self.stats.underrun_events;
        loop {
            match self.pop(self.cfg.chunk_samples) {
                PopResult::Audio(mut a) => out.append(&mut a),
                PopResult::Underrun(mut a) => {
                    out.append(&mut a);
                    self.starved = false;
                    self.stats.underrun_events = events_before;
                    break;
                }
                PopResult::NotReady => unreachable!("started is set"),
            }
        }
        out
    }
}
