//! Post-training INT8 quantization and the integer inference path.
//!
//! Weights are per-tensor symmetric (zero point 0, scale max|w|/127).
//! Activations are per-tensor affine with ranges taken from a calibration
//! set. All layer arithmetic accumulates in i32; requantization between
//! layers uses a fixed-point multiplier (i64 product, rounded shift), so the
//! integer path contains no floating point until the final logit dequant.

use serde::{Deserialize, Serialize};

use crate::kws::model::{
    argmax, ClipLabel, KwsModel, Pass, C1_OUT, C2_OUT, FLAT, IN_CHANNELS, IN_FRAMES, KERNEL,
    N_CLASSES, P1_FRAMES, P2_FRAMES,
};

/// Guards degenerate calibration ranges (constant activations).
pub const SCALE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantParams {
    pub scale: f64,
    pub zero_point: i32,
}

impl QuantParams {
    /// Affine parameters covering [min, max] with the full i8 range.
    pub fn from_range(min: f64, max: f64) -> Self {
        let span = (max - min).max(0.0);
        let scale = (span / 255.0).max(SCALE_FLOOR);
        let zero_point = (-128.0 - min / scale).round().clamp(-128.0, 127.0) as i32;
        Self { scale, zero_point }
    }

    pub fn quantize(&self, x: f64) -> i8 {
        ((x / self.scale).round() as i64 + self.zero_point as i64).clamp(-128, 127) as i8
    }

    pub fn dequantize(&self, q: i8) -> f64 {
        (q as i32 - self.zero_point) as f64 * self.scale
    }
}

/// Fixed-point requantization multiplier: `real` as mult * 2^-shift with a
/// 31-bit mantissa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Requant {
    pub mult: i32,
    pub shift: u32,
}

impl Requant {
    pub fn from_real(real: f64) -> Self {
        assert!(real > 0.0, "requant multiplier must be positive, got {real}");
        // Normalize to mantissa in [0.5, 1).
        let mut m = real;
        let mut exp = 0i32;
        while m >= 1.0 {
            m /= 2.0;
            exp += 1;
        }
        while m < 0.5 {
            m *= 2.0;
            exp -= 1;
        }
        let mut mult = (m * (1u64 << 31) as f64).round() as i64;
        if mult == 1 << 31 {
            mult >>= 1;
            exp += 1;
        }
        let mut shift = 31 - exp;
        if shift > 62 {
            // Ratio so small it underflows the fixed-point domain; saturate
            // to the widest shift (the product rounds to zero, as it should).
            mult = (real * (1u64 << 62) as f64).round() as i64;
            shift = 62;
        }
        assert!(shift >= 1, "requant ratio {real} too large for an i32 accumulator");
        Self { mult: mult as i32, shift: shift as u32 }
    }

    /// Rounded multiply-shift on an i32 accumulator.
    pub fn apply(&self, acc: i32) -> i32 {
        let prod = acc as i64 * self.mult as i64;
        let rounding = 1i64 << (self.shift - 1);
        ((prod + rounding) >> self.shift) as i32
    }
}

/// Weights plus bias for one integer layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantTensor {
    pub weights: Vec<i8>,
    pub scale: f64,
    /// Bias pre-scaled to the accumulator domain (input scale * weight scale).
    pub bias: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedKwsModel {
    pub input_q: QuantParams,
    pub act1_q: QuantParams,
    pub act2_q: QuantParams,
    pub conv1: QuantTensor,
    pub conv2: QuantTensor,
    pub dense: QuantTensor,
    pub requant1: Requant,
    pub requant2: Requant,
    /// Dequant scale for the dense accumulator into real-valued logits.
    pub logit_scale: f64,
}

fn symmetric_scale(w: &[f64]) -> f64 {
    let max = w.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    (max / 127.0).max(SCALE_FLOOR)
}

fn quantize_weights(w: &[f64], scale: f64) -> Vec<i8> {
    w.iter()
        .map(|&v| ((v / scale).round() as i64).clamp(-127, 127) as i8)
        .collect()
}

fn quantize_bias(b: &[f64], acc_scale: f64) -> Vec<i32> {
    b.iter().map(|&v| (v / acc_scale).round() as i32).collect()
}

struct RangeTracker {
    min: f64,
    max: f64,
}

impl RangeTracker {
    fn new() -> Self {
        Self { min: f64::INFINITY, max: f64::NEG_INFINITY }
    }

    fn observe(&mut self, values: &[f64]) {
        for &v in values {
            self.min = self.min.min(v);
            self.max = self.max.max(v);
        }
    }

    fn params(&self) -> QuantParams {
        // An empty or constant range still yields valid (floored) params.
        let (min, max) = if self.min.is_finite() { (self.min, self.max) } else { (0.0, 0.0) };
        QuantParams::from_range(min.min(0.0).min(max), max.max(min))
    }
}

/// Calibrate activation ranges on `calibration` inputs and quantize.
pub fn quantize(model: &KwsModel, calibration: &[Vec<f64>]) -> QuantizedKwsModel {
    assert!(!calibration.is_empty(), "calibration set must not be empty");
    let mut in_range = RangeTracker::new();
    let mut a1_range = RangeTracker::new();
    let mut a2_range = RangeTracker::new();
    for x in calibration {
        let cache = model.forward(x, Pass::Eval);
        in_range.observe(&cache.x);
        a1_range.observe(&cache.p1);
        a2_range.observe(&cache.p2);
    }
    let input_q = in_range.params();
    let act1_q = a1_range.params();
    let act2_q = a2_range.params();

    let s_w1 = symmetric_scale(&model.conv1_w);
    let s_w2 = symmetric_scale(&model.conv2_w);
    let s_wd = symmetric_scale(&model.dense_w);

    QuantizedKwsModel {
        conv1: QuantTensor {
            weights: quantize_weights(&model.conv1_w, s_w1),
            scale: s_w1,
            bias: quantize_bias(&model.conv1_b, input_q.scale * s_w1),
        },
        conv2: QuantTensor {
            weights: quantize_weights(&model.conv2_w, s_w2),
            scale: s_w2,
            bias: quantize_bias(&model.conv2_b, act1_q.scale * s_w2),
        },
        dense: QuantTensor {
            weights: quantize_weights(&model.dense_w, s_wd),
            scale: s_wd,
            bias: quantize_bias(&model.dense_b, act2_q.scale * s_wd),
        },
        requant1: Requant::from_real(input_q.scale * s_w1 / act1_q.scale),
        requant2: Requant::from_real(act1_q.scale * s_w2 / act2_q.scale),
        logit_scale: act2_q.scale * s_wd,
        input_q,
        act1_q,
        act2_q,
    }
}

/// Integer conv: i8 weights, zero-point-corrected i8 inputs, i32 accumulator.
fn conv_int(
    x: &[i8],
    x_zp: i32,
    in_ch: usize,
    frames: usize,
    t: &QuantTensor,
    out_ch: usize,
) -> Vec<i32> {
    let half = KERNEL / 2;
    let mut out = vec![0i32; out_ch * frames];
    for o in 0..out_ch {
        for time in 0..frames {
            let mut acc: i32 = t.bias[o];
            for c in 0..in_ch {
                for k in 0..KERNEL {
                    let ti = time + k;
                    if ti < half || ti - half >= frames {
                        continue;
                    }
                    let w = t.weights[(o * in_ch + c) * KERNEL + k] as i32;
                    let v = x[c * frames + ti - half] as i32 - x_zp;
                    acc += w * v;
                }
            }
            out[o * frames + time] = acc;
        }
    }
    out
}

/// Requantize accumulators into the next activation domain, apply ReLU at
/// the zero point, then width-2 max pool.
fn requant_relu_pool(
    acc: &[i32],
    rq: Requant,
    out_q: QuantParams,
    ch: usize,
    frames: usize,
    out_frames: usize,
) -> Vec<i8> {
    let zp = out_q.zero_point;
    let mut out = vec![0i8; ch * out_frames];
    for c in 0..ch {
        for u in 0..out_frames {
            let q = |i: usize| -> i32 {
                let v = zp + rq.apply(acc[c * frames + i]);
                v.clamp(-128, 127).max(zp)
            };
            out[c * out_frames + u] = q(2 * u).max(q(2 * u + 1)) as i8;
        }
    }
    out
}

impl QuantizedKwsModel {
    pub fn quantize_input(&self, x: &[f64]) -> Vec<i8> {
        x.iter().map(|&v| self.input_q.quantize(v)).collect()
    }

    /// Full integer forward pass; returns real-valued logits.
    pub fn forward_logits(&self, x: &[f64]) -> Vec<f64> {
        let xq = self.quantize_input(x);
        self.forward_logits_q(&xq)
    }

    pub fn forward_logits_q(&self, xq: &[i8]) -> Vec<f64> {
        assert_eq!(xq.len(), IN_CHANNELS * IN_FRAMES);
        let acc1 = conv_int(xq, self.input_q.zero_point, IN_CHANNELS, IN_FRAMES, &self.conv1, C1_OUT);
        let a1 = requant_relu_pool(&acc1, self.requant1, self.act1_q, C1_OUT, IN_FRAMES, P1_FRAMES);

        let acc2 = conv_int(&a1, self.act1_q.zero_point, C1_OUT, P1_FRAMES, &self.conv2, C2_OUT);
        let a2 = requant_relu_pool(&acc2, self.requant2, self.act2_q, C2_OUT, P1_FRAMES, P2_FRAMES);

        let zp = self.act2_q.zero_point;
        let mut logits = Vec::with_capacity(N_CLASSES);
        for o in 0..N_CLASSES {
            let mut acc: i32 = self.dense.bias[o];
            for i in 0..FLAT {
                acc += self.dense.weights[o * FLAT + i] as i32 * (a2[i] as i32 - zp);
            }
            logits.push(acc as f64 * self.logit_scale);
        }
        logits
    }

    pub fn posteriors(&self, x: &[f64]) -> Vec<f64> {
        crate::kws::model::softmax(&self.forward_logits(x))
    }

    pub fn predict(&self, x: &[f64]) -> (ClipLabel, Vec<f64>) {
        let probs = self.posteriors(x);
        (ClipLabel::ALL[argmax(&probs)], probs)
    }

    /// Posterior of the wake class for one feature window.
    pub fn wake_posterior(&self, features: &crate::dsp::features::FeatureMatrix) -> f64 {
        let x = KwsModel::input_from_features(features);
        self.posteriors(&x)[ClipLabel::HeyDotty.index()]
    }

    pub fn weight_count(&self) -> usize {
        self.conv1.weights.len()
            + self.conv1.bias.len()
            + self.conv2.weights.len()
            + self.conv2.bias.len()
            + self.dense.weights.len()
            + self.dense.bias.len()
    }
}

/// Fraction of inputs where float and integer paths pick the same class.
pub fn agreement(model: &KwsModel, q: &QuantizedKwsModel, inputs: &[Vec<f64>]) -> f64 {
    if inputs.is_empty() {
        return 1.0;
    }
    let same = inputs
        .iter()
        .filter(|x| model.predict(x).0 == q.predict(x).0)
        .count();
    same as f64 / inputs.len() as f64
}
