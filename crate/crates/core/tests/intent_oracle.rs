//! Independent checks on the intent stack: finite-difference validation of
//! the training gradient, monotone descent and held-out accuracy on the
//! bundled corpus, and the two canonical routed utterances.

use dotty_core::intent::corpus::{bundled_corpus, split_corpus};
use dotty_core::intent::model::{
    batch_gradient, batch_loss, classify, fit, FitConfig, IntentLabel, Utterance, N_INTENTS,
};
use dotty_core::intent::tfidf::TfidfVectorizer;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn analytic_gradient_matches_central_differences_everywhere() {
    // Small corpus keeps the parameter count tractable for an exhaustive
    // sweep while exercising shared tokens across classes.
    let texts: [(&str, IntentLabel); 8] = [
        ("take a photo", IntentLabel::DeviceControl),
        ("take a picture now", IntentLabel::DeviceControl),
        ("what do you see", IntentLabel::VisualQuery),
        ("what's on this table?", IntentLabel::VisualQuery),
        ("what is the capital of france", IntentLabel::GeneralQuestion),
        ("how tall is mount everest", IntentLabel::GeneralQuestion),
        ("hey how are you", IntentLabel::Conversational),
        ("tell me a joke", IntentLabel::Conversational),
    ];
    let docs: Vec<&str> = texts.iter().map(|(t, _)| *t).collect();
    let vectorizer = TfidfVectorizer::fit(&docs);
    let v = vectorizer.vocab_len();
    let xs: Vec<Vec<(usize, f64)>> = docs.iter().map(|t| vectorizer.transform(t)).collect();
    let ys: Vec<usize> = texts.iter().map(|(_, l)| l.index()).collect();
    let l2 = 1e-4;

    // Random nonzero parameters so no gradient component is trivially zero.
    let mut rng = ChaCha8Rng::seed_from_u64(0xCAFE);
    let mut weights: Vec<f64> = (0..N_INTENTS * v).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut bias = [0.0; N_INTENTS];
    for b in &mut bias {
        *b = rng.random_range(-0.5..0.5);
    }

    let (gw, gb) = batch_gradient(&xs, &ys, &weights, &bias, v, l2);
    let mut worst = 0.0f64;
    for i in 0..weights.len() + N_INTENTS {
        let orig = if i < weights.len() { weights[i] } else { bias[i - weights.len()] };
        let h = 1e-6 * orig.abs().max(1.0);
        let mut probe = |val: f64, w: &mut Vec<f64>, b: &mut [f64; N_INTENTS]| {
            if i < w.len() {
                w[i] = val;
            } else {
                b[i - w.len()] = val;
            }
        };
        probe(orig + h, &mut weights, &mut bias);
        let up = batch_loss(&xs, &ys, &weights, &bias, v, l2);
        probe(orig - h, &mut weights, &mut bias);
        let down = batch_loss(&xs, &ys, &weights, &bias, v, l2);
        probe(orig, &mut weights, &mut bias);

        let numeric = (up - down) / (2.0 * h);
        let analytic = if i < gw.len() { gw[i] } else { gb[i - gw.len()] };
        let denom = analytic.abs().max(numeric.abs()).max(1e-7);
        let rel = (analytic - numeric).abs() / denom;
        worst = worst.max(rel);
        assert!(rel <= 1e-4, "param {i}: analytic {analytic:.3e} vs numeric {numeric:.3e}, rel {rel:.3e}");
    }
    println!("worst relative error {worst:.2e} over {} parameters", weights.len() + N_INTENTS);
}

#[test]
fn bundled_corpus_loss_descends_monotonically() {
    let (_, _, report) = fit(&bundled_corpus(), &FitConfig::default()).unwrap();
    for (i, w) in report.loss.windows(2).enumerate() {
        assert!(w[1] <= w[0] + 1e-12, "loss rose at epoch {i}: {} -> {}", w[0], w[1]);
    }
    assert_eq!(report.train_accuracy, 1.0, "bundled corpus should fit exactly");
}

#[test]
fn held_out_accuracy_clears_90_percent_across_seeds() {
    let corpus = bundled_corpus();
    for seed in [1u64, 2, 3, 4, 5] {
        let (train, held) = split_corpus(&corpus, 0.2, seed);
        let (vec_, clf, _) = fit(&train, &FitConfig::default()).unwrap();
        let mut correct = 0;
        for u in &held {
            let got = classify(&vec_, &clf, &u.text);
            if got.label == u.label {
                correct += 1;
            } else {
                println!(
                    "seed {seed}: {:?} labeled {} but classified {} ({:.2})",
                    u.text,
                    u.label.as_str(),
                    got.label.as_str(),
                    got.confidence()
                );
            }
        }
        let acc = correct as f64 / held.len() as f64;
        println!("seed {seed}: held-out accuracy {acc:.3}");
        assert!(acc >= 0.9, "seed {seed}: held-out accuracy {acc:.3} under 0.9");
    }
}

#[test]
fn canonical_utterances_classify_and_route_as_documented() {
    let (vec_, clf, _) = fit(&bundled_corpus(), &FitConfig::default()).unwrap();
    let photo = classify(&vec_, &clf, "take a photo");
    assert_eq!(photo.label, IntentLabel::DeviceControl);
    let table = classify(&vec_, &clf, "what's on this table?");
    assert_eq!(table.label, IntentLabel::VisualQuery);

    use dotty_core::intent::route::{route, Pathway};
    assert_eq!(route(photo.label, photo.confidence()).pathway, Pathway::DeviceCommand);
    assert_eq!(route(table.label, table.confidence()).pathway, Pathway::VisualPipeline);
}

#[test]
fn classification_stays_under_latency_budget() {
    let corpus = bundled_corpus();
    let (vec_, clf, _) = fit(&corpus, &FitConfig::default()).unwrap();
    let t0 = std::time::Instant::now();
    for u in &corpus {
        let _ = classify(&vec_, &clf, &u.text);
    }
    let per = t0.elapsed().as_secs_f64() / corpus.len() as f64;
    println!("classify latency {:.3} ms/utterance", per * 1e3);
    assert!(per <= 0.050, "classify took {per:.4} s per utterance, budget 50 ms");
}

#[test]
fn fit_rejects_degenerate_corpora() {
    let single: Vec<Utterance> = bundled_corpus()
        .into_iter()
        .filter(|u| u.label == IntentLabel::Conversational)
        .collect();
    assert!(fit(&single, &FitConfig::default()).is_err(), "one-class corpus must not fit");
}
