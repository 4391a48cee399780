//! TF-IDF vectorizer over lowercase alphanumeric word tokens. Term
//! frequency is normalized by document length so the argmax of any linear
//! model on top is invariant to repeating a document; idf uses the smooth
//! form ln((1+N)/(1+df)) + 1, which stays strictly positive even for
//! tokens present in every document.

use std::collections::BTreeMap;

/// Lowercase alphanumeric runs; everything else separates tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for lc in ch.to_lowercase() {
                current.push(lc);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[derive(Debug, Clone)]
pub struct TfidfVectorizer {
    /// Token to feature index; frozen at fit time. BTreeMap keeps the
    /// vocabulary order stable across runs and serialization.
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<f64>,
}

impl TfidfVectorizer {
    /// Build the vocabulary and idf weights from the training documents.
    pub fn fit(documents: &[&str]) -> Self {
        let n = documents.len();
        let mut vocabulary = BTreeMap::new();
        for doc in documents {
            for tok in tokenize(doc) {
                let next = vocabulary.len();
                vocabulary.entry(tok).or_insert(next);
            }
        }
        // Entries were indexed in first-seen order; reindex in sorted order
        // so indices match the map's iteration order.
        for (i, (_, idx)) in vocabulary.iter_mut().enumerate() {
            *idx = i;
        }

        let mut df = vec![0usize; vocabulary.len()];
        for doc in documents {
            let mut toks: Vec<usize> = tokenize(doc)
                .iter()
                .filter_map(|t| vocabulary.get(t).copied())
                .collect();
            toks.sort_unstable();
            toks.dedup();
            for t in toks {
                df[t] += 1;
            }
        }
        let idf = df
            .iter()
            .map(|&d| ((1.0 + n as f64) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        Self { vocabulary, idf }
    }

    pub fn from_parts(vocabulary: BTreeMap<String, usize>, idf: Vec<f64>) -> Self {
        Self { vocabulary, idf }
    }

    pub fn vocab_len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    /// Sparse tf-idf vector as (index, weight) pairs sorted by index.
    /// Unknown tokens vanish; an empty result means nothing in the text
    /// intersects the training vocabulary.
    pub fn transform(&self, text: &str) -> Vec<(usize, f64)> {
        let toks = tokenize(text);
        let total = toks.len() as f64;
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for t in &toks {
            if let Some(&i) = self.vocabulary.get(t) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        counts
            .into_iter()
            .map(|(i, c)| (i, (c as f64 / total) * self.idf[i]))
            .collect()
    }
}
