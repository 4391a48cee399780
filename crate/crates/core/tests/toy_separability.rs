//! Model-free separability oracle for the synthetic corpus: if a
//! nearest-centroid classifier on half-clip MFCC means clears 90%, the
//! corpus carries enough signal for the CNN gate above it. Two halves
//! rather than one global mean because the wake class and its confusable
//! mirror share a long-term spectrum and differ only in temporal order.

use dotty_core::dataset::toy::generate_toy_corpus;
use dotty_core::dsp::features::{FeatureConfig, FeatureExtractor};
use dotty_core::kws::model::ClipLabel;

/// Mean MFCC of the first and second half of the frames that cover real
/// audio (the window zero-pads short clips; padded frames carry only the
/// clip's duration, which is not class information).
fn half_means(e: &FeatureExtractor, pcm: &dotty_core::PcmBuffer) -> Vec<f64> {
    let m = e.mfcc_window(pcm).unwrap();
    let frame = e.config().frame_samples();
    let stride = e.config().stride_samples();
    let active = if pcm.len() < frame {
        1
    } else {
        (1 + (pcm.len() - frame) / stride).min(m.rows)
    };
    let mut out = vec![0.0; 2 * m.cols];
    let split = active / 2;
    for r in 0..active {
        let (half, n) = if r < split { (0, split) } else { (1, active - split) };
        for c in 0..m.cols {
            out[half * m.cols + c] += m.row(r)[c] / n as f64;
        }
    }
    out
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[test]
fn nearest_centroid_on_half_clip_mfcc_means_clears_90_percent() {
    let e = FeatureExtractor::new(FeatureConfig::default()).unwrap();
    let train = generate_toy_corpus(30, 100);
    let test = generate_toy_corpus(10, 200);

    let mut centroids = vec![vec![0.0; 26]; 4];
    let mut counts = [0usize; 4];
    for c in &train {
        let f = half_means(&e, &c.pcm);
        let k = c.label.index();
        counts[k] += 1;
        for (acc, v) in centroids[k].iter_mut().zip(&f) {
            *acc += v;
        }
    }
    for (cent, n) in centroids.iter_mut().zip(counts) {
        for v in cent.iter_mut() {
            *v /= n as f64;
        }
    }

    let mut correct = 0;
    let mut per_class = [[0usize; 4]; 4];
    for c in &test {
        let f = half_means(&e, &c.pcm);
        let pred = (0..4)
            .min_by(|&a, &b| dist2(&f, &centroids[a]).total_cmp(&dist2(&f, &centroids[b])))
            .unwrap();
        per_class[c.label.index()][pred] += 1;
        if pred == c.label.index() {
            correct += 1;
        }
    }
    let acc = correct as f64 / test.len() as f64;
    println!("nearest-centroid accuracy {acc:.3}");
    for (i, row) in per_class.iter().enumerate() {
        println!("{:9} -> {row:?}", ClipLabel::ALL[i].as_str());
    }
    assert!(acc >= 0.9, "nearest-centroid accuracy {acc:.3} under 0.9");
}
