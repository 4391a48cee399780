//! Discrete-event simulation tying the device, the channel model, and the
//! edge service together under one virtual clock. A scenario file scripts
//! the microphone, the link, and the fixtures; the world replays it
//! deterministically and emits query records, jitter statistics, an energy
//! ledger, delivery traces, and a JSON-lines event log.

pub mod scenario;
pub mod world;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::toy;
use crate::dsp::features::{FeatureConfig, FeatureExtractor};
use crate::intent::corpus::bundled_corpus;
use crate::intent::model::FitConfig;
use crate::kws::model::KwsModel;
use crate::kws::quant::{self, QuantizedKwsModel};
use crate::kws::train::{self, Example, TrainConfig};
use crate::{IntentClassifier, TfidfVectorizer};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid scenario: {}", .0.join("; "))]
    InvalidScenario(Vec<String>),
    #[error("channel rejected its config: {0}")]
    Channel(String),
    #[error("device error: {0}")]
    Device(#[from] crate::device::DeviceError),
    #[error("edge error: {0}")]
    Edge(#[from] crate::EdgeError),
    #[error("training error: {0}")]
    Kws(#[from] crate::kws::KwsError),
    #[error("intent error: {0}")]
    Intent(#[from] crate::intent::IntentError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// One line of the run's event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    pub t_us: u64,
    /// Which part of the system produced the event.
    pub entity: String,
    pub kind: String,
    pub detail: String,
}

/// Trained models a run needs. Kept outside the scenario file so many runs
/// can share one training pass.
#[derive(Debug, Clone)]
pub struct SimAssets {
    pub kws: KwsModel,
    /// The deployed form; the simulated device scores with this one.
    pub kws_int8: QuantizedKwsModel,
    pub vectorizer: TfidfVectorizer,
    pub classifier: IntentClassifier,
}

impl SimAssets {
    /// Train the wake model on the bundled synthetic corpus and the intent
    /// model on the bundled utterances. Fully deterministic.
    pub fn train_default() -> Result<Self, SimError> {
        let extractor = FeatureExtractor::new(FeatureConfig::default())
            .expect("default feature config is valid");
        let corpus = toy::generate_toy_corpus(50, 7);
        let examples: Vec<Example> = corpus
            .iter()
            .map(|clip| {
                let feats = extractor
                    .mfcc_window(&clip.pcm)
                    .expect("toy clips are synthesized at the extractor's rate");
                Example { x: KwsModel::input_from_features(&feats), label: clip.label }
            })
            .collect();
        let (kws, _report) = train::train(&examples, &TrainConfig::default())?;
        let calibration: Vec<Vec<f64>> = examples.iter().map(|e| e.x.clone()).collect();
        let kws_int8 = quant::quantize(&kws, &calibration);
        let (vectorizer, classifier, _fit) =
            crate::intent::model::fit(&bundled_corpus(), &FitConfig::default())?;
        Ok(Self { kws, kws_int8, vectorizer, classifier })
    }
}
