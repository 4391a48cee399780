//! Energy-based segmentation of long recordings into utterance clips:
//! short-time energy over 20 ms hops, a threshold relative to the noise
//! floor, padding around active runs, and gap merging.

use serde::Serialize;

use crate::audio::pcm::PcmBuffer;
use crate::dataset::DatasetError;

const HOP_MS: usize = 20;
const PAD_MS: usize = 100;
/// Auto threshold: this many dB above the 10th-percentile hop energy.
const AUTO_MARGIN_DB: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub start_s: f64,
    pub end_s: f64,
}

impl Segment {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Threshold choice: automatic (noise floor + margin) or absolute dBFS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Auto,
    DbFs(f64),
}

fn hop_energies_db(pcm: &PcmBuffer) -> Vec<f64> {
    let hop = pcm.sample_rate() as usize * HOP_MS / 1_000;
    pcm.samples()
        .chunks(hop)
        .map(|c| {
            let ms: f64 = c.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>() / c.len() as f64;
            10.0 * (ms / (32_768.0 * 32_768.0) + 1e-12).log10()
        })
        .collect()
}

/// Cut a recording into non-overlapping segments of audible activity.
///
/// Runs of hops above threshold are padded by 100 ms on each side; padded
/// runs closer than `min_gap_ms` merge into one segment.
pub fn segment(
    pcm: &PcmBuffer,
    min_gap_ms: u32,
    threshold: Threshold,
) -> Result<Vec<Segment>, DatasetError> {
    if pcm.is_empty() {
        return Ok(Vec::new());
    }
    if pcm.duration_s() * 1_000.0 < HOP_MS as f64 {
        return Err(DatasetError::InvalidSegment(format!(
            "recording shorter than one {HOP_MS} ms hop"
        )));
    }

    let energies = hop_energies_db(pcm);
    let thr_db = match threshold {
        Threshold::DbFs(v) => v,
        Threshold::Auto => {
            let mut sorted = energies.clone();
            sorted.sort_by(f64::total_cmp);
            let floor = sorted[(sorted.len() - 1) / 10];
            floor + AUTO_MARGIN_DB
        }
    };

    // Active hop runs -> padded time intervals.
    let hop_s = HOP_MS as f64 / 1_000.0;
    let pad_s = PAD_MS as f64 / 1_000.0;
    let total_s = pcm.duration_s();
    let mut raw: Vec<(f64, f64)> = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, &e) in energies.iter().chain(std::iter::once(&f64::NEG_INFINITY)).enumerate() {
        match (run_start, e > thr_db) {
            (None, true) => run_start = Some(i),
            (Some(s), false) => {
                raw.push((
                    (s as f64 * hop_s - pad_s).max(0.0),
                    (i as f64 * hop_s + pad_s).min(total_s),
                ));
                run_start = None;
            }
            _ => {}
        }
    }

    // Merge overlapping or near segments.
    let min_gap_s = min_gap_ms as f64 / 1_000.0;
    let mut merged: Vec<Segment> = Vec::new();
    for (start, end) in raw {
        match merged.last_mut() {
            Some(prev) if start - prev.end_s < min_gap_s => prev.end_s = end.max(prev.end_s),
            _ => merged.push(Segment { start_s: start, end_s: end }),
        }
    }
    Ok(merged)
}

/// Extract one segment as a standalone clip.
pub fn extract(pcm: &PcmBuffer, seg: Segment) -> PcmBuffer {
    let rate = pcm.sample_rate() as f64;
    let a = ((seg.start_s * rate).round() as usize).min(pcm.len());
    let b = ((seg.end_s * rate).round() as usize).min(pcm.len());
    PcmBuffer::new(pcm.samples()[a..b].to_vec(), pcm.sample_rate())
}
