//! Intent layer: TF-IDF text features, a multinomial logistic-regression
//! classifier over four intent labels, and the router that maps each label
//! onto one of the three execution pathways.

pub mod corpus;
pub mod format;
pub mod model;
pub mod route;
pub mod tfidf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IntentError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("corpus covers {0} class(es); at least 2 required")]
    TooFewClasses(usize),
    #[error("invalid fit parameters: {0}")]
    InvalidConfig(String),
    #[error("model file is not valid: {0}")]
    BadModelFile(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
