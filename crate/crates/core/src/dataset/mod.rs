//! Dataset tooling: corpus ingestion from label folders, summary statistics,
//! energy-based segmentation of long recordings, seeded augmentation, and a
//! synthetic toy corpus for end-to-end runs without recorded audio.

pub mod augment;
pub mod corpus;
pub mod segment;
pub mod toy;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus root {0} is not a directory")]
    NotADirectory(String),
    #[error("corpus has no usable clips under {0}")]
    EmptyCorpus(String),
    #[error("invalid augmentation spec: {0}")]
    InvalidAugment(String),
    #[error("invalid segmentation parameters: {0}")]
    InvalidSegment(String),
}
