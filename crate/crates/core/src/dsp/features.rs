//! MFCC extraction over one-second analysis windows.
//!
//! Processing chain per window:
//!
//! 1. pre-emphasis `y[n] = x[n] - coeff * x[n-1]`
//! 2. framing: 25 ms frames every 20 ms (49 frames per 1 s window)
//! 3. Hamming window, zero-pad to the FFT size, power spectrum
//! 4. mel filterbank (32 triangular filters, 0 Hz to Nyquist)
//! 5. `ln(energy + log_floor)`
//! 6. orthonormal DCT-II, keeping the first 13 coefficients (C0 included)
//!
//! With defaults one window yields a 49 x 13 matrix, 637 values.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::pcm::PcmBuffer;
use crate::dsp::DspError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub sample_rate_hz: u32,
    /// Analysis window the detector slides over the stream.
    pub window_ms: u32,
    pub frame_len_ms: u32,
    pub frame_stride_ms: u32,
    pub n_mel_filters: usize,
    pub n_mfcc: usize,
    pub pre_emphasis: f64,
    /// Added to mel energies before the log to bound silence at ln(floor).
    pub log_floor: f64,
    pub n_fft: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 16_000,
            window_ms: 1_000,
            frame_len_ms: 25,
            frame_stride_ms: 20,
            n_mel_filters: 32,
            n_mfcc: 13,
            pre_emphasis: 0.98,
            log_floor: 1e-10,
            n_fft: 512,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        let err = |m: String| Err(DspError::InvalidConfig(m));
        if self.sample_rate_hz == 0 {
            return err("sample rate must be positive".into());
        }
        if self.frame_len_ms == 0 || self.frame_stride_ms == 0 {
            return err("frame length and stride must be positive".into());
        }
        if self.frame_stride_ms > self.frame_len_ms {
            return err(format!(
                "stride {} ms exceeds frame length {} ms; frames would skip samples",
                self.frame_stride_ms, self.frame_len_ms
            ));
        }
        if self.window_ms < self.frame_len_ms {
            return err("window shorter than one frame".into());
        }
        if self.n_mfcc == 0 || self.n_mel_filters == 0 {
            return err("need at least one filter and one coefficient".into());
        }
        if self.n_mfcc > self.n_mel_filters {
            return err(format!(
                "{} MFCCs from {} mel filters; DCT cannot exceed its input size",
                self.n_mfcc, self.n_mel_filters
            ));
        }
        if self.frame_samples() > self.n_fft {
            return err(format!(
                "frame of {} samples exceeds FFT size {}",
                self.frame_samples(),
                self.n_fft
            ));
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return err(format!("pre-emphasis {} outside [0, 1)", self.pre_emphasis));
        }
        if self.log_floor <= 0.0 {
            return err("log floor must be positive".into());
        }
        Ok(())
    }

    pub fn window_samples(&self) -> usize {
        (self.sample_rate_hz as u64 * self.window_ms as u64 / 1_000) as usize
    }

    pub fn frame_samples(&self) -> usize {
        (self.sample_rate_hz as u64 * self.frame_len_ms as u64 / 1_000) as usize
    }

    pub fn stride_samples(&self) -> usize {
        (self.sample_rate_hz as u64 * self.frame_stride_ms as u64 / 1_000) as usize
    }

    /// Frames per analysis window; 49 with defaults.
    pub fn frames_per_window(&self) -> usize {
        1 + (self.window_samples() - self.frame_samples()) / self.stride_samples()
    }

    /// Feature values per window; 637 with defaults.
    pub fn features_per_window(&self) -> usize {
        self.frames_per_window() * self.n_mfcc
    }
}

/// Row-major feature matrix: one row per frame, one column per coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "feature matrix shape mismatch");
        Self { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(|v| format!("{v:.6}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Extractor with precomputed window, filterbank, DCT basis, and FFT plan.
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    hamming: Vec<f64>,
    /// n_mel_filters rows of n_fft/2 + 1 spectral weights.
    filterbank: Vec<Vec<f64>>,
    /// n_mfcc rows of n_mel_filters DCT-II basis values.
    dct_basis: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank over FFT bin center frequencies.
pub fn mel_filterbank(cfg: &FeatureConfig) -> Vec<Vec<f64>> {
    let n_bins = cfg.n_fft / 2 + 1;
    let nyquist = cfg.sample_rate_hz as f64 / 2.0;
    let mel_hi = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..cfg.n_mel_filters + 2)
        .map(|i| mel_to_hz(mel_hi * i as f64 / (cfg.n_mel_filters + 1) as f64))
        .collect();

    let bin_hz = cfg.sample_rate_hz as f64 / cfg.n_fft as f64;
    (0..cfg.n_mel_filters)
        .map(|m| {
            let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..n_bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= center {
                        (f - lo) / (center - lo)
                    } else {
                        (hi - f) / (hi - center)
                    }
                })
                .collect()
        })
        .collect()
}

impl FeatureExtractor {
    pub fn new(cfg: FeatureConfig) -> Result<Self, DspError> {
        cfg.validate()?;
        let n = cfg.frame_samples();
        let hamming = (0..n)
            .map(|i| {
                0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()
            })
            .collect();
        let filterbank = mel_filterbank(&cfg);
        let nm = cfg.n_mel_filters as f64;
        let dct_basis = (0..cfg.n_mfcc)
            .map(|k| {
                let scale = if k == 0 { (1.0 / nm).sqrt() } else { (2.0 / nm).sqrt() };
                (0..cfg.n_mel_filters)
                    .map(|j| {
                        scale
                            * (std::f64::consts::PI * (2.0 * j as f64 + 1.0) * k as f64
                                / (2.0 * nm))
                                .cos()
                    })
                    .collect()
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(cfg.n_fft);
        Ok(Self { cfg, hamming, filterbank, dct_basis, fft })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    /// MFCCs for one analysis window. Shorter input is zero-padded up to the
    /// window; longer input is an error so callers cannot silently truncate.
    pub fn mfcc_window(&self, pcm: &PcmBuffer) -> Result<FeatureMatrix, DspError> {
        if pcm.sample_rate() != self.cfg.sample_rate_hz {
            return Err(DspError::RateMismatch {
                got: pcm.sample_rate(),
                want: self.cfg.sample_rate_hz,
            });
        }
        let win = self.cfg.window_samples();
        if pcm.len() > win {
            return Err(DspError::WindowOverrun { got: pcm.len(), max: win });
        }
        let mut x = vec![0.0f64; win];
        for (i, &s) in pcm.samples().iter().enumerate() {
            x[i] = s as f64;
        }
        Ok(self.mfcc_padded(&x))
    }

    fn mfcc_padded(&self, x: &[f64]) -> FeatureMatrix {
        let emphasized = pre_emphasize(x, self.cfg.pre_emphasis);
        let frame_len = self.cfg.frame_samples();
        let stride = self.cfg.stride_samples();
        let n_frames = self.cfg.frames_per_window();
        let n_bins = self.cfg.n_fft / 2 + 1;

        let mut data = Vec::with_capacity(n_frames * self.cfg.n_mfcc);
        let mut spectrum = vec![Complex::new(0.0, 0.0); self.cfg.n_fft];
        for f in 0..n_frames {
            let start = f * stride;
            for c in spectrum.iter_mut() {
                *c = Complex::new(0.0, 0.0);
            }
            for i in 0..frame_len {
                spectrum[i].re = emphasized[start + i] * self.hamming[i];
            }
            self.fft.process(&mut spectrum);

            let power: Vec<f64> = spectrum[..n_bins].iter().map(|c| c.norm_sqr()).collect();
            let log_mel: Vec<f64> = self
                .filterbank
                .iter()
                .map(|filt| {
                    let e: f64 = filt.iter().zip(&power).map(|(w, p)| w * p).sum();
                    (e + self.cfg.log_floor).ln()
                })
                .collect();
            for basis in &self.dct_basis {
                data.push(basis.iter().zip(&log_mel).map(|(b, m)| b * m).sum());
            }
        }
        FeatureMatrix::new(n_frames, self.cfg.n_mfcc, data)
    }
}

pub fn pre_emphasize(x: &[f64], coeff: f64) -> Vec<f64> {
    let mut y = Vec::with_capacity(x.len());
    let mut prev = 0.0;
    for &v in x {
        y.push(v - coeff * prev);
        prev = v;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn extractor() -> FeatureExtractor {
        FeatureExtractor::new(FeatureConfig::default()).unwrap()
    }

    #[test]
    fn default_window_yields_49_by_13() {
        let cfg = FeatureConfig::default();
        assert_eq!(cfg.frames_per_window(), 49);
        assert_eq!(cfg.features_per_window(), 637);
        let m = extractor().mfcc_window(&synth::speech_proxy(1.0, 16_000, 1)).unwrap();
        assert_eq!((m.rows, m.cols), (49, 13));
    }

    #[test]
    fn short_input_is_zero_padded() {
        let m = extractor().mfcc_window(&synth::sine(440.0, 0.5, 0.3, 16_000)).unwrap();
        assert_eq!(m.rows, 49);
        // Padded frames see only silence: C0 bottoms out near ln(log_floor).
        let tail = m.row(48)[0];
        let silent_floor = (1e-10f64).ln() * (32.0f64).sqrt().recip() * 32.0;
        assert!((tail - silent_floor).abs() / silent_floor.abs() < 0.05,
            "tail C0 {tail} should be near the silence floor {silent_floor}");
    }

    #[test]
    fn long_input_is_rejected() {
        let err = extractor().mfcc_window(&synth::sine(440.0, 0.5, 1.1, 16_000));
        assert!(matches!(err, Err(DspError::WindowOverrun { .. })));
    }

    #[test]
    fn wrong_sample_rate_is_rejected() {
        let err = extractor().mfcc_window(&synth::sine(440.0, 0.5, 0.5, 8_000));
        assert!(matches!(err, Err(DspError::RateMismatch { got: 8_000, .. })));
    }

    #[test]
    fn mel_filters_are_nonnegative_increasing_and_cover_the_band() {
        let cfg = FeatureConfig::default();
        let fb = mel_filterbank(&cfg);
        assert_eq!(fb.len(), 32);
        let peak_bin = |row: &Vec<f64>| {
            row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0
        };
        let peaks: Vec<usize> = fb.iter().map(peak_bin).collect();
        assert!(peaks.windows(2).all(|w| w[0] < w[1]), "filter peaks must ascend: {peaks:?}");
        for (i, row) in fb.iter().enumerate() {
            assert!(row.iter().all(|&w| w >= 0.0), "filter {i} has negative weight");
            assert!(row.iter().sum::<f64>() > 0.0, "filter {i} is empty");
        }
        // Every bin from the first filter's rise to Nyquist is covered.
        let first_nonzero = fb[0].iter().position(|&w| w > 0.0).unwrap();
        for k in first_nonzero..=256 {
            let total: f64 = fb.iter().map(|row| row[k]).sum();
            assert!(total > 0.0, "bin {k} uncovered");
        }
    }

    #[test]
    fn dct_rows_are_orthonormal() {
        let e = extractor();
        for a in 0..13 {
            for b in 0..13 {
                let dot: f64 = e.dct_basis[a].iter().zip(&e.dct_basis[b]).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12, "dct rows {a},{b} dot {dot}");
            }
        }
    }

    #[test]
    fn stride_shift_moves_rows_exactly() {
        let e = extractor();
        let full = synth::speech_proxy(1.5, 16_000, 9);
        let base = PcmBuffer::new(full.samples()[..16_000].to_vec(), 16_000);
        let shifted = PcmBuffer::new(full.samples()[320..16_320].to_vec(), 16_000);
        let fa = e.mfcc_window(&base).unwrap();
        let fb = e.mfcc_window(&shifted).unwrap();
        // Row 0 of the shifted window differs at its first pre-emphasis
        // sample; all later rows are sample-identical computations.
        for r in 1..48 {
            for c in 0..13 {
                let d = (fb.row(r)[c] - fa.row(r + 1)[c]).abs();
                assert!(d < 1e-9, "row {r} col {c} differs by {d}");
            }
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = FeatureConfig { n_mfcc: 40, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = FeatureConfig { frame_stride_ms: 30, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = FeatureConfig { n_fft: 256, ..Default::default() };
        assert!(bad.validate().is_err(), "400-sample frame cannot fit a 256 FFT");
    }

    #[test]
    fn csv_rendering_has_six_decimals() {
        let m = FeatureMatrix::new(1, 3, vec![1.0, -0.5, 0.1234567]);
        assert_eq!(m.to_csv(), "1.000000,-0.500000,0.123457\n");
    }
}
