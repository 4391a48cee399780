//! Seeded augmentation: gain, circular time shift, and additive noise at a
//! target SNR. Positive (wake word) clips are coerced into the duration
//! band the detector window expects.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audio::pcm::PcmBuffer;
use crate::dataset::corpus::LabeledClip;
use crate::dataset::DatasetError;
use crate::kws::model::ClipLabel;

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentSpec {
    pub gain_db: (f64, f64),
    pub snr_db: (f64, f64),
    pub shift_ms: (f64, f64),
    /// Duration band enforced for wake-word clips (pad or trim into range).
    pub positive_duration_s: (f64, f64),
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            gain_db: (-6.0, 6.0),
            snr_db: (5.0, 25.0),
            shift_ms: (-100.0, 100.0),
            positive_duration_s: (0.6, 1.0),
        }
    }
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        for (name, (lo, hi)) in [
            ("gain_db", self.gain_db),
            ("snr_db", self.snr_db),
            ("shift_ms", self.shift_ms),
            ("positive_duration_s", self.positive_duration_s),
        ] {
            if lo > hi {
                return Err(DatasetError::InvalidAugment(format!(
                    "{name} range inverted: {lo} > {hi}"
                )));
            }
        }
        if self.positive_duration_s.0 <= 0.0 {
            return Err(DatasetError::InvalidAugment(
                "positive duration band must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.random_range(range.0..range.1)
    }
}

/// Pad (split front/back) or center-trim into [lo, hi] seconds.
fn conform_duration(pcm: &PcmBuffer, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> PcmBuffer {
    let rate = pcm.sample_rate();
    let n = pcm.len();
    let lo_n = (lo * rate as f64).round() as usize;
    let hi_n = (hi * rate as f64).round() as usize;
    if n < lo_n {
        let deficit = lo_n - n;
        let front = rng.random_range(0..=deficit);
        let mut samples = vec![0i16; front];
        samples.extend_from_slice(pcm.samples());
        samples.resize(lo_n, 0);
        PcmBuffer::new(samples, rate)
    } else if n > hi_n {
        let start = rng.random_range(0..=n - hi_n);
        PcmBuffer::new(pcm.samples()[start..start + hi_n].to_vec(), rate)
    } else {
        pcm.clone()
    }
}

fn circular_shift(pcm: &PcmBuffer, shift_ms: f64) -> PcmBuffer {
    let n = pcm.len() as i64;
    if n == 0 {
        return pcm.clone();
    }
    let shift = ((shift_ms / 1_000.0 * pcm.sample_rate() as f64).round() as i64).rem_euclid(n);
    let mut samples = Vec::with_capacity(n as usize);
    for i in 0..n {
        samples.push(pcm.samples()[((i - shift).rem_euclid(n)) as usize]);
    }
    PcmBuffer::new(samples, pcm.sample_rate())
}

fn add_noise_at_snr(pcm: &mut PcmBuffer, snr_db: f64, rng: &mut ChaCha8Rng) {
    let signal_rms = pcm.rms();
    if signal_rms == 0.0 {
        return;
    }
    let noise_rms = signal_rms / 10f64.powf(snr_db / 20.0);
    // Uniform white noise has rms = amp / sqrt(3).
    let amp = noise_rms * 3f64.sqrt();
    for s in pcm.samples_mut() {
        let v = *s as f64 + rng.random_range(-amp..amp);
        *s = v.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
    }
}

/// Produce `n` randomized variants of one clip. Every draw comes from the
/// seeded stream, so (clip, spec, n, seed) fully determines the output.
pub fn augment(
    clip: &LabeledClip,
    spec: &AugmentSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<LabeledClip>, DatasetError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut pcm = clip.pcm.clone();
        if clip.label == ClipLabel::HeyDotty {
            let (lo, hi) = spec.positive_duration_s;
            pcm = conform_duration(&pcm, lo, hi, &mut rng);
        }
        pcm = circular_shift(&pcm, uniform(&mut rng, spec.shift_ms));
        pcm.apply_gain(10f64.powf(uniform(&mut rng, spec.gain_db) / 20.0));
        add_noise_at_snr(&mut pcm, uniform(&mut rng, spec.snr_db), &mut rng);
        out.push(LabeledClip {
            pcm,
            label: clip.label,
            source: format!("{}#aug{i}", clip.source),
        });
    }
    Ok(out)
}
