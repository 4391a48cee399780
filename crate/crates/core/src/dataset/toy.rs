//! Synthetic four-class corpus for running the full pipeline without any
//! recorded audio. The classes are acoustically distinct but deliberately
//! adversarial in pairs: the wake class is a rising sweep and the confusable
//! class is the same sweep falling, so only temporal structure separates
//! them.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audio::pcm::PcmBuffer;
use crate::audio::wav::write_wav;
use crate::dataset::corpus::LabeledClip;
use crate::dataset::DatasetError;
use crate::kws::model::ClipLabel;
use crate::synth;

const RATE: u32 = 16_000;

fn sub_seed(seed: u64, label: ClipLabel, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((label.index() as u64) << 32)
        .wrapping_add(i as u64)
}

/// One synthetic clip of the given class.
pub fn synth_clip(label: ClipLabel, seed: u64) -> PcmBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match label {
        ClipLabel::HeyDotty => sweep_clip(&mut rng, true),
        ClipLabel::Confuse => sweep_clip(&mut rng, false),
        ClipLabel::Noise => {
            let amp = rng.random_range(0.05..0.25);
            let dur = rng.random_range(0.6..1.0);
            let noise_seed = rng.random::<u64>();
            synth::white_noise(amp, dur, RATE, noise_seed)
        }
        ClipLabel::Unknown => {
            let dur = rng.random_range(0.6..1.0);
            let n = rng.random_range(2..=3);
            let comps: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.random_range(250.0..2_600.0), rng.random_range(0.08..0.18)))
                .collect();
            synth::multi_tone(&comps, dur, RATE)
        }
    }
}

/// The wake word proxy: a two-octave sweep between 400 and 1400 Hz with a
/// soft harmonic and a light noise floor. `rising` distinguishes the wake
/// class from its confusable mirror.
fn sweep_clip(rng: &mut ChaCha8Rng, rising: bool) -> PcmBuffer {
    let scale = rng.random_range(0.9..1.1);
    let (f_lo, f_hi) = (400.0 * scale, 1_400.0 * scale);
    let (f0, f1) = if rising { (f_lo, f_hi) } else { (f_hi, f_lo) };
    let dur = rng.random_range(0.6..0.9);
    let amp = rng.random_range(0.25..0.45);
    let body = synth::chirp(f0, f1, amp, dur, RATE);
    let harmonic = synth::chirp(f0 * 2.0, f1 * 2.0, amp * 0.25, dur, RATE);
    let floor_seed = rng.random::<u64>();
    let floor = synth::white_noise(0.01, dur, RATE, floor_seed);
    synth::mix_at(&synth::mix_at(&body, &harmonic, 0.0), &floor, 0.0)
}

/// A fresh wake-word utterance; used by scenario fixtures as well as the
/// corpus generator.
pub fn wake_word_clip(seed: u64) -> PcmBuffer {
    synth_clip(ClipLabel::HeyDotty, seed)
}

pub fn generate_toy_corpus(per_class: usize, seed: u64) -> Vec<LabeledClip> {
    let mut out = Vec::with_capacity(per_class * ClipLabel::ALL.len());
    for label in ClipLabel::ALL {
        for i in 0..per_class {
            out.push(LabeledClip {
                pcm: synth_clip(label, sub_seed(seed, label, i)),
                label,
                source: format!("toy://{}/{i}", label.as_str()),
            });
        }
    }
    out
}

/// Materialize the toy corpus as WAV label folders.
pub fn write_toy_corpus(dir: &std::path::Path, per_class: usize, seed: u64) -> Result<usize, DatasetError> {
    let clips = generate_toy_corpus(per_class, seed);
    for c in &clips {
        let sub = dir.join(c.label.as_str());
        std::fs::create_dir_all(&sub)?;
        let i = c.source.rsplit('/').next().unwrap();
        write_wav(&sub.join(format!("{}_{i}.wav", c.label.as_str())), &c.pcm)
            .map_err(|e| DatasetError::Io(std::io::Error::other(e.to_string())))?;
    }
    Ok(clips.len())
}
