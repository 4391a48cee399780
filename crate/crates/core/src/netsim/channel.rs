//! One-directional impaired link. Frames pass through four stages:
//! bandwidth serialization (frames queue behind each other), coexistence
//! stalls (transmission defers until the stall window closes), base
//! propagation latency, and additive jitter. Loss and reordering draw from
//! their own seeded random streams, so changing one impairment knob never
//! perturbs the draw sequence of another; delivered-frame sets shrink
//! monotonically as loss_prob grows.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ms_to_us, us_to_ms, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoexistenceMode {
    Off,
    Naive,
    Prioritized,
}

fn default_stall_period_ms() -> f64 {
    1000.0
}

fn default_stall_duration_ms() -> f64 {
    200.0
}

fn default_reorder_extra_ms() -> f64 {
    50.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub base_latency_ms: f64,
    /// Uniform jitter half-width; the draw is clamped so nothing arrives
    /// earlier than the base latency allows.
    pub jitter_ms: f64,
    pub loss_prob: f64,
    pub reorder_prob: f64,
    pub bandwidth_kbps: f64,
    pub coexistence_mode: CoexistenceMode,
    pub seed: u64,
    /// Extra delay a reordered frame suffers, pushing it behind its
    /// successors.
    #[serde(default = "default_reorder_extra_ms")]
    pub reorder_extra_ms: f64,
    /// Naive-mode stall schedule: windows of `stall_duration_ms` every
    /// `stall_period_ms` while the sibling channel is active.
    #[serde(default = "default_stall_period_ms")]
    pub stall_period_ms: f64,
    #[serde(default = "default_stall_duration_ms")]
    pub stall_duration_ms: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            base_latency_ms: 20.0,
            jitter_ms: 0.0,
            loss_prob: 0.0,
            reorder_prob: 0.0,
            bandwidth_kbps: 1000.0,
            coexistence_mode: CoexistenceMode::Off,
            seed: 0,
            reorder_extra_ms: default_reorder_extra_ms(),
            stall_period_ms: default_stall_period_ms(),
            stall_duration_ms: default_stall_duration_ms(),
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(format!("loss_prob {} outside [0, 1]", self.loss_prob));
        }
        if !(0.0..=1.0).contains(&self.reorder_prob) {
            return Err(format!("reorder_prob {} outside [0, 1]", self.reorder_prob));
        }
        if self.base_latency_ms < 0.0 || self.jitter_ms < 0.0 {
            return Err("latencies must be non-negative".into());
        }
        if self.bandwidth_kbps <= 0.0 {
            return Err(format!("bandwidth_kbps {} must be positive", self.bandwidth_kbps));
        }
        if self.stall_period_ms <= 0.0 || self.stall_duration_ms < 0.0 {
            return Err("stall schedule must have positive period".into());
        }
        if self.stall_duration_ms >= self.stall_period_ms {
            return Err("stall_duration_ms must be shorter than stall_period_ms".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEntry {
    pub id: u64,
    pub send_t: SimTime,
    /// None when the frame was lost.
    pub deliver_t: Option<SimTime>,
    pub size_bytes: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub min_latency_ms: f64,
    pub mean_latency_ms: f64,
    pub max_latency_ms: f64,
}

#[derive(Debug)]
pub struct Channel {
    cfg: ChannelConfig,
    loss_rng: ChaCha8Rng,
    jitter_rng: ChaCha8Rng,
    reorder_rng: ChaCha8Rng,
    busy_until: SimTime,
    coexist_active: bool,
    trace: Vec<TraceEntry>,
}

impl Channel {
    pub fn new(cfg: ChannelConfig) -> Result<Channel, String> {
        cfg.validate()?;
        // Distinct stream tags keep the three draws independent under one
        // scenario seed.
        let loss_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(3).wrapping_add(1));
        let jitter_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(3).wrapping_add(2));
        let reorder_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(3).wrapping_add(3));
        Ok(Channel {
            cfg,
            loss_rng,
            jitter_rng,
            reorder_rng,
            busy_until: 0,
            coexist_active: false,
            trace: Vec::new(),
        })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    /// Naive coexistence stalls apply only while the sibling radio is
    /// marked active.
    pub fn set_coexistence_active(&mut self, active: bool) {
        self.coexist_active = active;
    }

    fn stalled(&self, t: SimTime) -> Option<SimTime> {
        if self.cfg.coexistence_mode != CoexistenceMode::Naive || !self.coexist_active {
            return None;
        }
        let period = ms_to_us(self.cfg.stall_period_ms);
        let duration = ms_to_us(self.cfg.stall_duration_ms);
        let phase = t % period;
        if phase < duration {
            Some(t - phase + duration)
        } else {
            None
        }
    }

    /// Schedule one frame. Returns the delivery time, or None if lost.
    /// Draw order is fixed (loss, jitter, reorder) so traces reproduce.
    pub fn send(&mut self, size_bytes: usize, t_now: SimTime) -> Option<SimTime> {
        self.send_inner(size_bytes, t_now, false)
    }

    /// Control-plane variant: the link-layer retransmits until the frame
    /// gets through, so loss and reorder outcomes are ignored. All three
    /// RNG draws still happen, keeping media-plane streams aligned between
    /// runs that differ only in control traffic handling.
    pub fn send_reliable(&mut self, size_bytes: usize, t_now: SimTime) -> SimTime {
        self.send_inner(size_bytes, t_now, true)
            .expect("reliable send always yields a delivery time")
    }

    fn send_inner(&mut self, size_bytes: usize, t_now: SimTime, reliable: bool) -> Option<SimTime> {
        let id = self.trace.len() as u64;
        let loss_draw = self.loss_rng.random::<f64>() < self.cfg.loss_prob;
        let jitter_draw: f64 = if self.cfg.jitter_ms > 0.0 {
            self.jitter_rng.random_range(-self.cfg.jitter_ms..=self.cfg.jitter_ms)
        } else {
            0.0
        };
        let reorder_draw = self.reorder_rng.random::<f64>() < self.cfg.reorder_prob;
        let lost = !reliable && loss_draw;
        let reordered = !reliable && reorder_draw;

        if lost {
            self.trace.push(TraceEntry { id, send_t: t_now, deliver_t: None, size_bytes });
            return None;
        }

        let mut start = self.busy_until.max(t_now);
        if let Some(resume) = self.stalled(start) {
            start = resume;
        }
        let ser_us = (size_bytes as f64 * 8.0) / self.cfg.bandwidth_kbps * 1000.0;
        let depart = start + ser_us.round() as SimTime;
        self.busy_until = depart;

        // Early arrivals are physically impossible, so the negative side of
        // the jitter draw clamps at the base latency.
        let extra_ms = jitter_draw.max(0.0)
            + if reordered { self.cfg.reorder_extra_ms } else { 0.0 };
        let deliver = depart + ms_to_us(self.cfg.base_latency_ms) + ms_to_us(extra_ms);
        self.trace.push(TraceEntry { id, send_t: t_now, deliver_t: Some(deliver), size_bytes });
        Some(deliver)
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn stats(&self) -> TraceStats {
        let mut s = TraceStats {
            sent: self.trace.len() as u64,
            min_latency_ms: f64::INFINITY,
            ..Default::default()
        };
        let mut sum = 0.0;
        for e in &self.trace {
            match e.deliver_t {
                Some(d) => {
                    s.delivered += 1;
                    let lat = us_to_ms(d - e.send_t);
                    s.min_latency_ms = s.min_latency_ms.min(lat);
                    s.max_latency_ms = s.max_latency_ms.max(lat);
                    sum += lat;
                }
                None => s.dropped += 1,
            }
        }
        if s.delivered > 0 {
            s.mean_latency_ms = sum / s.delivered as f64;
        } else {
            s.min_latency_ms = 0.0;
        }
        s
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("frame_id,send_t_us,deliver_t_us,dropped,size_bytes\n");
        for e in &self.trace {
            match e.deliver_t {
                Some(d) => {
                    out.push_str(&format!("{},{},{},false,{}\n", e.id, e.send_t, d, e.size_bytes))
                }
                None => out.push_str(&format!("{},{},,true,{}\n", e.id, e.send_t, e.size_bytes)),
            }
        }
        out
    }
}
