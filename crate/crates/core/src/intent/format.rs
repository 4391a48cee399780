//! Versioned JSON persistence for the fitted vectorizer and classifier.
//! The vocabulary is stored as an index-ordered token list; weights as
//! four rows matching the label order in the file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{IntentClassifier, IntentLabel, N_INTENTS};
use super::tfidf::TfidfVectorizer;
use super::IntentError;

pub const FORMAT_TAG: &str = "intent-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    /// Token list ordered by feature index.
    vocabulary: Vec<String>,
    idf: Vec<f64>,
    /// Label names in weight-row order.
    labels: Vec<String>,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

pub fn save_model(
    path: &Path,
    vectorizer: &TfidfVectorizer,
    clf: &IntentClassifier,
) -> Result<(), IntentError> {
    let mut vocabulary = vec![String::new(); vectorizer.vocab_len()];
    for (tok, &i) in vectorizer.vocabulary() {
        vocabulary[i] = tok.clone();
    }
    let v = clf.vocab_len();
    let file = ModelFile {
        format: FORMAT_TAG.to_string(),
        version: FORMAT_VERSION,
        vocabulary,
        idf: vectorizer.idf().to_vec(),
        labels: IntentLabel::ALL.iter().map(|l| l.as_str().to_string()).collect(),
        weights: (0..N_INTENTS).map(|c| clf.weights()[c * v..(c + 1) * v].to_vec()).collect(),
        bias: clf.bias().to_vec(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(TfidfVectorizer, IntentClassifier), IntentError> {
    let file: ModelFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if file.format != FORMAT_TAG {
        return Err(IntentError::BadModelFile(format!("format tag {:?}", file.format)));
    }
    if file.version != FORMAT_VERSION {
        return Err(IntentError::BadModelFile(format!("unsupported version {}", file.version)));
    }
    let v = file.vocabulary.len();
    if file.idf.len() != v {
        return Err(IntentError::BadModelFile(format!(
            "idf length {} does not match vocabulary {v}",
            file.idf.len()
        )));
    }
    if file.idf.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(IntentError::BadModelFile("idf weights must be finite and >= 0".into()));
    }
    let expect_labels: Vec<&str> = IntentLabel::ALL.iter().map(|l| l.as_str()).collect();
    if file.labels != expect_labels {
        return Err(IntentError::BadModelFile(format!("label order {:?}", file.labels)));
    }
    if file.weights.len() != N_INTENTS || file.weights.iter().any(|r| r.len() != v) {
        return Err(IntentError::BadModelFile("weight matrix shape mismatch".into()));
    }
    if file.bias.len() != N_INTENTS {
        return Err(IntentError::BadModelFile(format!("bias length {}", file.bias.len())));
    }

    let mut vocabulary = BTreeMap::new();
    for (i, tok) in file.vocabulary.iter().enumerate() {
        if vocabulary.insert(tok.clone(), i).is_some() {
            return Err(IntentError::BadModelFile(format!("duplicate token {tok:?}")));
        }
    }
    let vectorizer = TfidfVectorizer::from_parts(vocabulary, file.idf);
    let weights: Vec<f64> = file.weights.into_iter().flatten().collect();
    let mut bias = [0.0; N_INTENTS];
    bias.copy_from_slice(&file.bias);
    Ok((vectorizer, IntentClassifier::from_parts(weights, bias, v)))
}
