//! The wake-word network: two same-padded 1-D convolutions with ReLU and
//! max-pooling, dropout between stages during training, and a dense softmax
//! head over four classes.
//!
//! Input is one MFCC window transposed to channels x time (13 x 49).
//! Weights live in f64 for exact, portable training math; the INT8 path in
//! [`crate::kws::quant`] derives its tensors from here.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const IN_CHANNELS: usize = 13;
pub const IN_FRAMES: usize = 49;
pub const KERNEL: usize = 3;
pub const C1_OUT: usize = 8;
pub const P1_FRAMES: usize = IN_FRAMES / 2; // 24, trailing odd frame dropped
pub const C2_OUT: usize = 16;
pub const P2_FRAMES: usize = P1_FRAMES / 2; // 12
pub const FLAT: usize = C2_OUT * P2_FRAMES; // 192
pub const N_CLASSES: usize = 4;

/// The four training classes, in output-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClipLabel {
    HeyDotty,
    Confuse,
    Noise,
    Unknown,
}

impl ClipLabel {
    pub const ALL: [ClipLabel; N_CLASSES] =
        [ClipLabel::HeyDotty, ClipLabel::Confuse, ClipLabel::Noise, ClipLabel::Unknown];

    pub fn index(self) -> usize {
        match self {
            ClipLabel::HeyDotty => 0,
            ClipLabel::Confuse => 1,
            ClipLabel::Noise => 2,
            ClipLabel::Unknown => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClipLabel::HeyDotty => "heydotty",
            ClipLabel::Confuse => "confuse",
            ClipLabel::Noise => "noise",
            ClipLabel::Unknown => "unknown",
        }
    }

    /// Folder-name parse; "random" is accepted as an alias for the unknown
    /// grab-bag class.
    pub fn from_folder(name: &str) -> Option<Self> {
        match name {
            "heydotty" => Some(ClipLabel::HeyDotty),
            "confuse" => Some(ClipLabel::Confuse),
            "noise" => Some(ClipLabel::Noise),
            "unknown" | "random" => Some(ClipLabel::Unknown),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KwsModel {
    /// conv1 weights [C1_OUT][IN_CHANNELS][KERNEL], flattened.
    pub conv1_w: Vec<f64>,
    pub conv1_b: Vec<f64>,
    /// conv2 weights [C2_OUT][C1_OUT][KERNEL], flattened.
    pub conv2_w: Vec<f64>,
    pub conv2_b: Vec<f64>,
    /// dense weights [N_CLASSES][FLAT], flattened.
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
}

/// Everything the backward pass needs from one forward evaluation.
pub struct ForwardCache {
    pub x: Vec<f64>,        // [IN_CHANNELS][IN_FRAMES]
    pub z1: Vec<f64>,       // conv1 pre-activation [C1_OUT][IN_FRAMES]
    pub p1: Vec<f64>,       // pooled+dropout [C1_OUT][P1_FRAMES]
    pub p1_arg: Vec<usize>, // winning frame per pooled cell
    pub mask1: Vec<f64>,    // dropout scale per p1 cell (1/(1-p) or 0)
    pub z2: Vec<f64>,       // conv2 pre-activation [C2_OUT][P1_FRAMES]
    pub p2: Vec<f64>,       // pooled+dropout [C2_OUT][P2_FRAMES]
    pub p2_arg: Vec<usize>,
    pub mask2: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Mode for one forward pass: evaluation, or training with dropout driven by
/// the supplied RNG.
pub enum Pass<'r> {
    Eval,
    Train { rng: &'r mut ChaCha8Rng, dropout: f64 },
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Same-padded 1-D convolution over [in_ch][t] data.
fn conv1d(
    x: &[f64],
    in_ch: usize,
    frames: usize,
    w: &[f64],
    b: &[f64],
    out_ch: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; out_ch * frames];
    let half = KERNEL / 2;
    for o in 0..out_ch {
        for t in 0..frames {
            let mut acc = b[o];
            for c in 0..in_ch {
                for k in 0..KERNEL {
                    let ti = t + k;
                    if ti < half || ti - half >= frames {
                        continue;
                    }
                    acc += w[(o * in_ch + c) * KERNEL + k] * x[c * frames + ti - half];
                }
            }
            out[o * frames + t] = acc;
        }
    }
    out
}

/// Width-2 max pool with ReLU applied first; odd trailing frame dropped.
/// Returns pooled values and the index of each winner for backprop.
fn relu_maxpool(z: &[f64], ch: usize, frames: usize, out_frames: usize) -> (Vec<f64>, Vec<usize>) {
    let mut out = vec![0.0; ch * out_frames];
    let mut arg = vec![0usize; ch * out_frames];
    for c in 0..ch {
        for u in 0..out_frames {
            let i0 = c * frames + 2 * u;
            let (a, b) = (z[i0].max(0.0), z[i0 + 1].max(0.0));
            if a >= b {
                out[c * out_frames + u] = a;
                arg[c * out_frames + u] = 2 * u;
            } else {
                out[c * out_frames + u] = b;
                arg[c * out_frames + u] = 2 * u + 1;
            }
        }
    }
    (out, arg)
}

fn dropout_mask(len: usize, pass: &mut Pass) -> Vec<f64> {
    match pass {
        Pass::Eval => vec![1.0; len],
        Pass::Train { rng, dropout } => {
            let keep = 1.0 - *dropout;
            (0..len)
                .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                .collect()
        }
    }
}

impl KwsModel {
    /// Uniform Xavier initialization, seeded.
    pub fn init(rng: &mut ChaCha8Rng) -> Self {
        let mut tensor = |len: usize, fan_in: usize, fan_out: usize| -> Vec<f64> {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..len).map(|_| rng.random_range(-limit..limit)).collect()
        };
        Self {
            conv1_w: tensor(C1_OUT * IN_CHANNELS * KERNEL, IN_CHANNELS * KERNEL, C1_OUT * KERNEL),
            conv1_b: vec![0.0; C1_OUT],
            conv2_w: tensor(C2_OUT * C1_OUT * KERNEL, C1_OUT * KERNEL, C2_OUT * KERNEL),
            conv2_b: vec![0.0; C2_OUT],
            dense_w: tensor(N_CLASSES * FLAT, FLAT, N_CLASSES),
            dense_b: vec![0.0; N_CLASSES],
        }
    }

    pub fn param_count(&self) -> usize {
        self.conv1_w.len()
            + self.conv1_b.len()
            + self.conv2_w.len()
            + self.conv2_b.len()
            + self.dense_w.len()
            + self.dense_b.len()
    }

    /// Feature matrix (frames x coeffs) transposed into the model's
    /// channels x time layout.
    pub fn input_from_features(m: &crate::dsp::features::FeatureMatrix) -> Vec<f64> {
        assert_eq!(m.rows, IN_FRAMES, "expected {IN_FRAMES} frames, got {}", m.rows);
        assert_eq!(m.cols, IN_CHANNELS, "expected {IN_CHANNELS} coefficients");
        let mut x = vec![0.0; IN_CHANNELS * IN_FRAMES];
        for t in 0..IN_FRAMES {
            for c in 0..IN_CHANNELS {
                x[c * IN_FRAMES + t] = m.row(t)[c];
            }
        }
        x
    }

    pub fn forward(&self, x: &[f64], mut pass: Pass) -> ForwardCache {
        assert_eq!(x.len(), IN_CHANNELS * IN_FRAMES);
        let z1 = conv1d(x, IN_CHANNELS, IN_FRAMES, &self.conv1_w, &self.conv1_b, C1_OUT);
        let (mut p1, p1_arg) = relu_maxpool(&z1, C1_OUT, IN_FRAMES, P1_FRAMES);
        let mask1 = dropout_mask(p1.len(), &mut pass);
        for (v, m) in p1.iter_mut().zip(&mask1) {
            *v *= m;
        }

        let z2 = conv1d(&p1, C1_OUT, P1_FRAMES, &self.conv2_w, &self.conv2_b, C2_OUT);
        let (mut p2, p2_arg) = relu_maxpool(&z2, C2_OUT, P1_FRAMES, P2_FRAMES);
        let mask2 = dropout_mask(p2.len(), &mut pass);
        for (v, m) in p2.iter_mut().zip(&mask2) {
            *v *= m;
        }

        let mut logits = self.dense_b.clone();
        for o in 0..N_CLASSES {
            for i in 0..FLAT {
                logits[o] += self.dense_w[o * FLAT + i] * p2[i];
            }
        }
        let probs = softmax(&logits);
        ForwardCache {
            x: x.to_vec(),
            z1,
            p1,
            p1_arg,
            mask1,
            z2,
            p2,
            p2_arg,
            mask2,
            logits,
            probs,
        }
    }

    pub fn predict(&self, x: &[f64]) -> (ClipLabel, Vec<f64>) {
        let cache = self.forward(x, Pass::Eval);
        let best = argmax(&cache.probs);
        (ClipLabel::ALL[best], cache.probs)
    }
}

pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap()
}
