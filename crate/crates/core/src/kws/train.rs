//! Training loop: seeded mini-batch SGD with cross-entropy loss, dropout in
//! the forward pass, and per-epoch train/validation metrics.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::kws::model::{
    argmax, ClipLabel, ForwardCache, KwsModel, Pass, C1_OUT, C2_OUT, FLAT, IN_CHANNELS,
    IN_FRAMES, KERNEL, N_CLASSES, P1_FRAMES, P2_FRAMES,
};
use crate::kws::KwsError;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub val_fraction: f64,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.005,
            batch_size: 32,
            val_fraction: 0.2,
            dropout: 0.25,
            seed: 0,
        }
    }
}

/// One training example: flattened channels x time input plus its class.
#[derive(Debug, Clone)]
pub struct Example {
    pub x: Vec<f64>,
    pub label: ClipLabel,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
    /// Indices into the input slice, fixed by the seeded split.
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

impl TrainReport {
    pub fn final_val_accuracy(&self) -> f64 {
        self.epochs.last().map(|e| e.val_acc).unwrap_or(0.0)
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{:.6},{:.4},{:.6},{:.4}\n",
                e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc
            ));
        }
        out
    }
}

/// Gradients in the same tensor order as the model.
pub struct Gradients {
    pub conv1_w: Vec<f64>,
    pub conv1_b: Vec<f64>,
    pub conv2_w: Vec<f64>,
    pub conv2_b: Vec<f64>,
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
}

impl Gradients {
    pub fn zeros() -> Self {
        Self {
            conv1_w: vec![0.0; C1_OUT * IN_CHANNELS * KERNEL],
            conv1_b: vec![0.0; C1_OUT],
            conv2_w: vec![0.0; C2_OUT * C1_OUT * KERNEL],
            conv2_b: vec![0.0; C2_OUT],
            dense_w: vec![0.0; N_CLASSES * FLAT],
            dense_b: vec![0.0; N_CLASSES],
        }
    }

    fn scale(&mut self, s: f64) {
        for t in [
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            &mut self.dense_w,
            &mut self.dense_b,
        ] {
            for v in t.iter_mut() {
                *v *= s;
            }
        }
    }
}

pub fn cross_entropy(probs: &[f64], label: ClipLabel) -> f64 {
    -(probs[label.index()].max(1e-300)).ln()
}

/// Backward pass for one example; accumulates into `g`.
pub fn accumulate_gradients(m: &KwsModel, cache: &ForwardCache, label: ClipLabel, g: &mut Gradients) {
    // Softmax + cross-entropy head.
    let mut dlogits = cache.probs.clone();
    dlogits[label.index()] -= 1.0;

    let mut dp2 = vec![0.0; FLAT];
    for o in 0..N_CLASSES {
        g.dense_b[o] += dlogits[o];
        for i in 0..FLAT {
            g.dense_w[o * FLAT + i] += dlogits[o] * cache.p2[i];
            dp2[i] += m.dense_w[o * FLAT + i] * dlogits[o];
        }
    }

    // Dropout, unpool, ReLU back to conv2 pre-activation.
    let mut dz2 = vec![0.0; C2_OUT * P1_FRAMES];
    for c in 0..C2_OUT {
        for u in 0..P2_FRAMES {
            let i = c * P2_FRAMES + u;
            let d = dp2[i] * cache.mask2[i];
            let src = c * P1_FRAMES + cache.p2_arg[i];
            if cache.z2[src] > 0.0 {
                dz2[src] += d;
            }
        }
    }

    // Conv2 weights and input gradient.
    let half = KERNEL / 2;
    let mut dp1 = vec![0.0; C1_OUT * P1_FRAMES];
    for o in 0..C2_OUT {
        for t in 0..P1_FRAMES {
            let d = dz2[o * P1_FRAMES + t];
            if d == 0.0 {
                continue;
            }
            g.conv2_b[o] += d;
            for c in 0..C1_OUT {
                for k in 0..KERNEL {
                    let ti = t + k;
                    if ti < half || ti - half >= P1_FRAMES {
                        continue;
                    }
                    let xi = c * P1_FRAMES + ti - half;
                    g.conv2_w[(o * C1_OUT + c) * KERNEL + k] += d * cache.p1[xi];
                    dp1[xi] += m.conv2_w[(o * C1_OUT + c) * KERNEL + k] * d;
                }
            }
        }
    }

    // Dropout, unpool, ReLU back to conv1 pre-activation.
    let mut dz1 = vec![0.0; C1_OUT * IN_FRAMES];
    for c in 0..C1_OUT {
        for u in 0..P1_FRAMES {
            let i = c * P1_FRAMES + u;
            let d = dp1[i] * cache.mask1[i];
            let src = c * IN_FRAMES + cache.p1_arg[i];
            if cache.z1[src] > 0.0 {
                dz1[src] += d;
            }
        }
    }

    // Conv1 weights; input gradient is not needed.
    for o in 0..C1_OUT {
        for t in 0..IN_FRAMES {
            let d = dz1[o * IN_FRAMES + t];
            if d == 0.0 {
                continue;
            }
            g.conv1_b[o] += d;
            for c in 0..IN_CHANNELS {
                for k in 0..KERNEL {
                    let ti = t + k;
                    if ti < half || ti - half >= IN_FRAMES {
                        continue;
                    }
                    g.conv1_w[(o * IN_CHANNELS + c) * KERNEL + k] +=
                        d * cache.x[c * IN_FRAMES + ti - half];
                }
            }
        }
    }
}

fn apply_update(m: &mut KwsModel, g: &Gradients, lr: f64) {
    let pairs: [(&mut Vec<f64>, &Vec<f64>); 6] = [
        (&mut m.conv1_w, &g.conv1_w),
        (&mut m.conv1_b, &g.conv1_b),
        (&mut m.conv2_w, &g.conv2_w),
        (&mut m.conv2_b, &g.conv2_b),
        (&mut m.dense_w, &g.dense_w),
        (&mut m.dense_b, &g.dense_b),
    ];
    for (w, dw) in pairs {
        for (wi, di) in w.iter_mut().zip(dw) {
            *wi -= lr * di;
        }
    }
}

/// Mean loss and accuracy of the model in eval mode over the given examples.
pub fn evaluate(m: &KwsModel, examples: &[&Example]) -> (f64, f64) {
    if examples.is_empty() {
        return (0.0, 0.0);
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for ex in examples {
        let cache = m.forward(&ex.x, Pass::Eval);
        loss += cross_entropy(&cache.probs, ex.label);
        if argmax(&cache.probs) == ex.label.index() {
            correct += 1;
        }
    }
    (loss / examples.len() as f64, correct as f64 / examples.len() as f64)
}

/// Confusion matrix: rows are true classes, columns predicted.
pub fn confusion(m: &KwsModel, examples: &[&Example]) -> [[usize; N_CLASSES]; N_CLASSES] {
    let mut cm = [[0usize; N_CLASSES]; N_CLASSES];
    for ex in examples {
        let (pred, _) = m.predict(&ex.x);
        cm[ex.label.index()][pred.index()] += 1;
    }
    cm
}

pub fn train(examples: &[Example], cfg: &TrainConfig) -> Result<(KwsModel, TrainReport), KwsError> {
    let min_needed = N_CLASSES * 2;
    if examples.len() < min_needed {
        return Err(KwsError::TooFewClips(examples.len(), min_needed));
    }
    for label in ClipLabel::ALL {
        if !examples.iter().any(|e| e.label == label) {
            return Err(KwsError::MissingClass(label.as_str()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut indices: Vec<usize> = (0..examples.len()).collect();
    indices.shuffle(&mut rng);
    let n_val = ((examples.len() as f64) * cfg.val_fraction).round() as usize;
    let (val_indices, train_indices) = indices.split_at(n_val);
    let (val_indices, mut train_order) = (val_indices.to_vec(), train_indices.to_vec());
    let train_indices = train_order.clone();
    let val_set: Vec<&Example> = val_indices.iter().map(|&i| &examples[i]).collect();

    let mut model = KwsModel::init(&mut rng);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        train_order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut correct = 0usize;
        for batch in train_order.chunks(cfg.batch_size) {
            let mut grads = Gradients::zeros();
            for &i in batch {
                let ex = &examples[i];
                let cache =
                    model.forward(&ex.x, Pass::Train { rng: &mut rng, dropout: cfg.dropout });
                epoch_loss += cross_entropy(&cache.probs, ex.label);
                if argmax(&cache.probs) == ex.label.index() {
                    correct += 1;
                }
                accumulate_gradients(&model, &cache, ex.label, &mut grads);
            }
            grads.scale(1.0 / batch.len() as f64);
            apply_update(&mut model, &grads, cfg.learning_rate);
        }
        let train_loss = epoch_loss / train_order.len() as f64;
        let train_acc = correct as f64 / train_order.len() as f64;
        let (val_loss, val_acc) = evaluate(&model, &val_set);
        epochs.push(EpochMetrics { epoch, train_loss, train_acc, val_loss, val_acc });
    }

    Ok((model, TrainReport { epochs, train_indices, val_indices }))
}

// --- flattened parameter access, used by the finite-difference checks ---

pub const TENSOR_NAMES: [&str; 6] =
    ["conv1_w", "conv1_b", "conv2_w", "conv2_b", "dense_w", "dense_b"];

pub fn flatten_params(m: &KwsModel) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.param_count());
    for t in [&m.conv1_w, &m.conv1_b, &m.conv2_w, &m.conv2_b, &m.dense_w, &m.dense_b] {
        out.extend_from_slice(t);
    }
    out
}

pub fn unflatten_params(m: &mut KwsModel, flat: &[f64]) {
    let mut pos = 0;
    for t in [
        &mut m.conv1_w,
        &mut m.conv1_b,
        &mut m.conv2_w,
        &mut m.conv2_b,
        &mut m.dense_w,
        &mut m.dense_b,
    ] {
        let len = t.len();
        t.copy_from_slice(&flat[pos..pos + len]);
        pos += len;
    }
    assert_eq!(pos, flat.len(), "parameter vector length mismatch");
}

/// Tensor name owning flat parameter index `i`.
pub fn tensor_of_index(m: &KwsModel, i: usize) -> &'static str {
    let lens = [
        m.conv1_w.len(),
        m.conv1_b.len(),
        m.conv2_w.len(),
        m.conv2_b.len(),
        m.dense_w.len(),
        m.dense_b.len(),
    ];
    let mut pos = 0;
    for (name, len) in TENSOR_NAMES.iter().zip(lens) {
        if i < pos + len {
            return name;
        }
        pos += len;
    }
    panic!("index {i} out of range");
}

/// Mean eval-mode loss over a fixed batch; the scalar function the
/// finite-difference oracle probes.
pub fn batch_loss(m: &KwsModel, batch: &[Example]) -> f64 {
    let refs: Vec<&Example> = batch.iter().collect();
    evaluate(m, &refs).0
}

/// Analytic gradient of [`batch_loss`] flattened in tensor order.
pub fn batch_gradient(m: &KwsModel, batch: &[Example]) -> Vec<f64> {
    let mut g = Gradients::zeros();
    for ex in batch {
        let cache = m.forward(&ex.x, Pass::Eval);
        accumulate_gradients(m, &cache, ex.label, &mut g);
    }
    g.scale(1.0 / batch.len() as f64);
    let mut out = Vec::with_capacity(m.param_count());
    for t in [&g.conv1_w, &g.conv1_b, &g.conv2_w, &g.conv2_b, &g.dense_w, &g.dense_b] {
        out.extend_from_slice(t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_example(label: ClipLabel, seed: u64) -> Example {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Class-dependent ramp plus noise: linearly separable enough for a
        // few epochs to bite.
        let base = label.index() as f64;
        let x = (0..IN_CHANNELS * IN_FRAMES)
            .map(|i| base * ((i % 7) as f64 / 7.0) + rng.random_range(-0.1..0.1))
            .collect();
        Example { x, label }
    }

    fn toy_set(per_class: usize) -> Vec<Example> {
        let mut out = Vec::new();
        for (ci, label) in ClipLabel::ALL.into_iter().enumerate() {
            for s in 0..per_class {
                out.push(toy_example(label, (ci * 1000 + s) as u64));
            }
        }
        out
    }

    #[test]
    fn training_reduces_loss_and_is_seed_deterministic() {
        let set = toy_set(8);
        let cfg = TrainConfig { epochs: 20, batch_size: 8, ..Default::default() };
        let (m1, r1) = train(&set, &cfg).unwrap();
        let (m2, r2) = train(&set, &cfg).unwrap();
        assert_eq!(m1.dense_w, m2.dense_w, "same seed must give same weights");
        let first = r1.epochs.first().unwrap().train_loss;
        let last = r1.epochs.last().unwrap().train_loss;
        assert!(last < first * 0.8, "loss should drop: {first:.3} -> {last:.3}");
        assert_eq!(r1.val_indices, r2.val_indices);
    }

    #[test]
    fn different_seeds_differ() {
        let set = toy_set(6);
        let cfg = TrainConfig { epochs: 3, ..Default::default() };
        let (m1, _) = train(&set, &cfg).unwrap();
        let (m2, _) = train(&set, &TrainConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(m1.dense_w, m2.dense_w);
    }

    #[test]
    fn missing_class_is_rejected() {
        let set: Vec<Example> = toy_set(4)
            .into_iter()
            .filter(|e| e.label != ClipLabel::Noise)
            .collect();
        assert!(matches!(
            train(&set, &TrainConfig::default()),
            Err(KwsError::MissingClass("noise"))
        ));
    }

    #[test]
    fn tiny_set_is_rejected() {
        let set = toy_set(1);
        assert!(matches!(
            train(&set[..4], &TrainConfig::default()),
            Err(KwsError::TooFewClips(4, _))
        ));
    }

    #[test]
    fn split_respects_fraction_and_disjointness() {
        let set = toy_set(10);
        let cfg = TrainConfig { epochs: 1, ..Default::default() };
        let (_, report) = train(&set, &cfg).unwrap();
        assert_eq!(report.val_indices.len(), 8);
        assert_eq!(report.train_indices.len(), 32);
        for v in &report.val_indices {
            assert!(!report.train_indices.contains(v), "index {v} leaked across split");
        }
    }

    #[test]
    fn flatten_unflatten_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = KwsModel::init(&mut rng);
        let flat = flatten_params(&m);
        assert_eq!(flat.len(), 1492);
        let mut m2 = KwsModel::init(&mut rng);
        unflatten_params(&mut m2, &flat);
        assert_eq!(m, m2);
        assert_eq!(tensor_of_index(&m, 0), "conv1_w");
        assert_eq!(tensor_of_index(&m, 319), "conv1_b");
        assert_eq!(tensor_of_index(&m, 1491), "dense_b");
    }
}
