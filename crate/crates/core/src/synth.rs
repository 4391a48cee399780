//! Deterministic waveform synthesis used for fixtures, the toy corpus, and
//! the text-to-speech stand-in.
//!
//! Everything here is seeded and pure: the same arguments always produce the
//! same samples, which keeps golden vectors and simulation runs reproducible.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audio::pcm::PcmBuffer;

pub const SAMPLE_RATE: u32 = 16_000;

/// Full-scale reference for i16 synthesis; amplitudes below are fractions of it.
const FULL_SCALE: f64 = 32_767.0;

fn clamp_i16(x: f64) -> i16 {
    x.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// Sine tone at `freq_hz` with amplitude as a fraction of full scale.
pub fn sine(freq_hz: f64, amplitude: f64, duration_s: f64, sample_rate: u32) -> PcmBuffer {
    let n = (duration_s * sample_rate as f64).round() as usize;
    let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate as f64;
    let samples = (0..n)
        .map(|i| clamp_i16(amplitude * FULL_SCALE * (w * i as f64).sin()))
        .collect();
    PcmBuffer::new(samples, sample_rate)
}

/// Linear chirp from `f0_hz` to `f1_hz`. Phase is integrated so the sweep is
/// continuous rather than frequency-stepped.
pub fn chirp(f0_hz: f64, f1_hz: f64, amplitude: f64, duration_s: f64, sample_rate: u32) -> PcmBuffer {
    let n = (duration_s * sample_rate as f64).round() as usize;
    let dt = 1.0 / sample_rate as f64;
    let mut phase = 0.0f64;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let frac = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        let f = f0_hz + (f1_hz - f0_hz) * frac;
        samples.push(clamp_i16(amplitude * FULL_SCALE * phase.sin()));
        phase += 2.0 * std::f64::consts::PI * f * dt;
    }
    PcmBuffer::new(samples, sample_rate)
}

/// Seeded white noise at the given amplitude.
pub fn white_noise(amplitude: f64, duration_s: f64, sample_rate: u32, seed: u64) -> PcmBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (duration_s * sample_rate as f64).round() as usize;
    let samples = (0..n)
        .map(|_| clamp_i16(amplitude * FULL_SCALE * rng.random_range(-1.0..1.0)))
        .collect();
    PcmBuffer::new(samples, sample_rate)
}

/// Silence of the given duration.
pub fn silence(duration_s: f64, sample_rate: u32) -> PcmBuffer {
    let n = (duration_s * sample_rate as f64).round() as usize;
    PcmBuffer::new(vec![0; n], sample_rate)
}

/// Sum of a few sines with per-component frequencies and amplitudes.
/// The result is clamped, so keep total amplitude at or below 1.0.
pub fn multi_tone(components: &[(f64, f64)], duration_s: f64, sample_rate: u32) -> PcmBuffer {
    let n = (duration_s * sample_rate as f64).round() as usize;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / sample_rate as f64;
        let mut v = 0.0;
        for &(f, a) in components {
            v += a * FULL_SCALE * (2.0 * std::f64::consts::PI * f * t).sin();
        }
        samples.push(clamp_i16(v));
    }
    PcmBuffer::new(samples, sample_rate)
}

/// Speech-like proxy: a sequence of short voiced segments (tone bursts whose
/// pitch is drawn from a seeded RNG) separated by brief low-energy gaps.
/// Used where real recorded speech would appear in a live system.
pub fn speech_proxy(duration_s: f64, sample_rate: u32, seed: u64) -> PcmBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (duration_s * sample_rate as f64).round() as usize;
    let mut samples = Vec::with_capacity(n);
    while samples.len() < n {
        let seg_s: f64 = rng.random_range(0.08..0.22);
        let gap_s: f64 = rng.random_range(0.01..0.05);
        let f0: f64 = rng.random_range(120.0..320.0);
        let burst = multi_tone(
            &[(f0, 0.35), (f0 * 2.0, 0.18), (f0 * 3.1, 0.08)],
            seg_s,
            sample_rate,
        );
        samples.extend_from_slice(burst.samples());
        let gap = (gap_s * sample_rate as f64).round() as usize;
        samples.extend(std::iter::repeat(0).take(gap));
    }
    samples.truncate(n);
    PcmBuffer::new(samples, sample_rate)
}

/// Concatenate buffers; all inputs must share one sample rate.
pub fn concat(parts: &[&PcmBuffer]) -> PcmBuffer {
    assert!(!parts.is_empty(), "concat needs at least one part");
    let rate = parts[0].sample_rate();
    let mut samples = Vec::new();
    for p in parts {
        assert_eq!(p.sample_rate(), rate, "sample rate mismatch in concat");
        samples.extend_from_slice(p.samples());
    }
    PcmBuffer::new(samples, rate)
}

/// Mix `b` into `a` starting at `offset_s`, saturating on overflow.
/// The output length is max(len(a), offset + len(b)).
pub fn mix_at(a: &PcmBuffer, b: &PcmBuffer, offset_s: f64) -> PcmBuffer {
    assert_eq!(a.sample_rate(), b.sample_rate(), "sample rate mismatch in mix");
    let off = (offset_s * a.sample_rate() as f64).round() as usize;
    let len = a.len().max(off + b.len());
    let mut out = vec![0i32; len];
    for (i, &s) in a.samples().iter().enumerate() {
        out[i] += s as i32;
    }
    for (i, &s) in b.samples().iter().enumerate() {
        out[off + i] += s as i32;
    }
    let samples = out
        .into_iter()
        .map(|v| v.clamp(i16::MIN as i32, i16::MAX as i32) as i16)
        .collect();
    PcmBuffer::new(samples, a.sample_rate())
}

/// One-minute deterministic program mixing tones, chirps, speech-proxy
/// segments, and noise beds. Serves as the standing compression fixture.
pub fn minute_fixture(seed: u64) -> PcmBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: Vec<PcmBuffer> = Vec::new();
    let mut total = 0.0f64;
    while total < 60.0 {
        let remaining = 60.0 - total;
        let dur = rng.random_range(1.0..3.0f64).min(remaining);
        let kind = rng.random_range(0..4);
        let part = match kind {
            0 => sine(rng.random_range(200.0..2000.0), 0.4, dur, SAMPLE_RATE),
            1 => chirp(
                rng.random_range(200.0..800.0),
                rng.random_range(1000.0..3000.0),
                0.35,
                dur,
                SAMPLE_RATE,
            ),
            2 => speech_proxy(dur, SAMPLE_RATE, rng.random_range(0..u64::MAX)),
            _ => white_noise(0.1, dur, SAMPLE_RATE, rng.random_range(0..u64::MAX)),
        };
        total += dur;
        parts.push(part);
    }
    let refs: Vec<&PcmBuffer> = parts.iter().collect();
    let mut out = concat(&refs);
    out.truncate(60 * SAMPLE_RATE as usize);
    out
}
