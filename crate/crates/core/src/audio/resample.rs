//! Integer-ratio resampling between the 16 kHz pipeline rate and common
//! capture rates (8, 32, 48 kHz). Non-integer ratios are rejected so nothing
//! silently degrades; a windowed-sinc low-pass handles anti-aliasing on the
//! way down and interpolation on the way up.

use crate::audio::pcm::PcmBuffer;
use crate::audio::AudioError;

/// Half-width of the sinc kernel in periods of the slower rate. 12 keeps
/// stopband rejection comfortably past 60 dB with a Hamming window.
const KERNEL_HALF_PERIODS: usize = 12;

/// Passband edge as a fraction of the slower rate's Nyquist.
const CUTOFF_FRACTION: f64 = 0.90;

pub fn to_16k(pcm: &PcmBuffer) -> Result<PcmBuffer, AudioError> {
    resample(pcm, 16_000)
}

/// Convert between rates related by an integer factor in either direction.
pub fn resample(pcm: &PcmBuffer, target_rate: u32) -> Result<PcmBuffer, AudioError> {
    let src = pcm.sample_rate();
    if src == target_rate {
        return Ok(pcm.clone());
    }
    if src % target_rate == 0 {
        Ok(decimate(pcm, (src / target_rate) as usize, target_rate))
    } else if target_rate % src == 0 {
        Ok(interpolate(pcm, (target_rate / src) as usize, target_rate))
    } else {
        Err(AudioError::UnsupportedRate(src))
    }
}

/// Symmetric windowed-sinc low-pass with DC gain 1. `cutoff` is in cycles
/// per sample; the kernel length is 2 * half + 1.
fn windowed_sinc(half: usize, cutoff: f64) -> Vec<f64> {
    let n = 2 * half + 1;
    let mut h = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 - half as f64;
        let sinc = if t == 0.0 {
            2.0 * cutoff
        } else {
            (2.0 * std::f64::consts::PI * cutoff * t).sin() / (std::f64::consts::PI * t)
        };
        let window = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos();
        h.push(sinc * window);
    }
    let sum: f64 = h.iter().sum();
    for v in &mut h {
        *v /= sum;
    }
    h
}

fn sample_at(x: &[i16], idx: isize) -> f64 {
    if idx < 0 || idx as usize >= x.len() {
        0.0
    } else {
        x[idx as usize] as f64
    }
}

fn decimate(pcm: &PcmBuffer, factor: usize, target_rate: u32) -> PcmBuffer {
    let x = pcm.samples();
    let half = KERNEL_HALF_PERIODS * factor;
    let h = windowed_sinc(half, CUTOFF_FRACTION * 0.5 / factor as f64);
    let n_out = x.len().div_ceil(factor);
    let mut out = Vec::with_capacity(n_out);
    for j in 0..n_out {
        let center = (j * factor) as isize;
        let mut acc = 0.0;
        for (k, &hk) in h.iter().enumerate() {
            acc += hk * sample_at(x, center + k as isize - half as isize);
        }
        out.push(acc.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16);
    }
    PcmBuffer::new(out, target_rate)
}

fn interpolate(pcm: &PcmBuffer, factor: usize, target_rate: u32) -> PcmBuffer {
    let x = pcm.samples();
    let half = KERNEL_HALF_PERIODS * factor;
    let h = windowed_sinc(half, CUTOFF_FRACTION * 0.5 / factor as f64);
    // Each output phase sees every factor-th tap; normalize phases
    // separately so DC gain is exactly 1 regardless of alignment.
    let mut phase_scale = vec![0.0f64; factor];
    for (m, &hm) in h.iter().enumerate() {
        phase_scale[m % factor] += hm;
    }
    // Tap index m contributes to output j from input i when j = i*factor + m - half,
    // so the phase of output j selects taps with m ≡ (j + half) mod factor.
    let n_out = x.len() * factor;
    let mut out = Vec::with_capacity(n_out);
    for j in 0..n_out {
        let mut acc = 0.0;
        let jc = j + half;
        // Taps with m ≡ jc (mod factor) land on real input samples.
        let mut m = jc % factor;
        while m < h.len() {
            let num = jc as isize - m as isize;
            debug_assert_eq!(num.rem_euclid(factor as isize), 0);
            acc += h[m] * sample_at(x, num / factor as isize);
            m += factor;
        }
        let scale = phase_scale[jc % factor];
        out.push((acc / scale).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16);
    }
    PcmBuffer::new(out, target_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::pcm::snr_db;
    use crate::synth;

    /// Compare against an ideally synthesized tone on the interior, skipping
    /// kernel-length edges where zero padding bleeds in.
    fn interior_snr(reference: &PcmBuffer, converted: &PcmBuffer, skip: usize) -> f64 {
        let n = reference.len().min(converted.len());
        snr_db(
            &reference.samples()[skip..n - skip],
            &converted.samples()[skip..n - skip],
        )
    }

    #[test]
    fn identity_when_rates_match() {
        let pcm = synth::sine(440.0, 0.5, 0.1, 16_000);
        assert_eq!(resample(&pcm, 16_000).unwrap(), pcm);
    }

    #[test]
    fn downsample_48k_preserves_tone() {
        let src = synth::sine(1_000.0, 0.5, 0.5, 48_000);
        let out = resample(&src, 16_000).unwrap();
        assert_eq!(out.sample_rate(), 16_000);
        assert_eq!(out.len(), src.len() / 3);
        let ideal = synth::sine(1_000.0, 0.5, 0.5, 16_000);
        let snr = interior_snr(&ideal, &out, 100);
        assert!(snr >= 30.0, "48k->16k tone SNR {snr:.1} dB");
    }

    #[test]
    fn upsample_8k_preserves_tone() {
        let src = synth::sine(1_000.0, 0.5, 0.5, 8_000);
        let out = resample(&src, 16_000).unwrap();
        assert_eq!(out.len(), src.len() * 2);
        let ideal = synth::sine(1_000.0, 0.5, 0.5, 16_000);
        let snr = interior_snr(&ideal, &out, 100);
        assert!(snr >= 30.0, "8k->16k tone SNR {snr:.1} dB");
    }

    #[test]
    fn duration_stays_within_one_sample_period() {
        for n in [15_999usize, 16_000, 16_001, 16_002] {
            let src = PcmBuffer::new(vec![0; n], 48_000);
            let out = resample(&src, 16_000).unwrap();
            let expect = n as f64 / 3.0;
            assert!(
                (out.len() as f64 - expect).abs() < 1.0,
                "length {} for {} input samples",
                out.len(),
                n
            );
        }
    }

    #[test]
    fn non_integer_ratio_is_rejected() {
        let src = PcmBuffer::new(vec![0; 100], 44_100);
        assert!(matches!(
            resample(&src, 16_000),
            Err(AudioError::UnsupportedRate(44_100))
        ));
    }

    #[test]
    fn decimation_attenuates_aliasing_band() {
        // 10 kHz is above the 16 kHz Nyquist; after 48k->16k it must not
        // fold back as audible energy.
        let src = synth::sine(10_000.0, 0.5, 0.5, 48_000);
        let out = resample(&src, 16_000).unwrap();
        let rms = out.rms();
        assert!(rms < 200.0, "aliased energy rms {rms:.0} should be tiny");
    }
}
