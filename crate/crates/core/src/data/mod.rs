//! Corpus generation, noise banks, manifests and feature extraction.

pub mod batch;
pub mod channel;
pub mod features;
pub mod manifest;
pub mod noise;
pub mod split;
pub mod synth;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use batch::{batch_iter, epoch_batches, BatchIter};
pub use channel::{channel_mismatch, channel_response_db, fir, CHANNEL_NAME, CHANNEL_TAPS};
pub use features::{model_inputs, AudioStore, FeatureConfig, RenderedEntry};
pub use manifest::{Manifest, ManifestEntry, Split, CLEAN, NO_CHANNEL};
pub use noise::{generate_noise, generate_noise_bank, load_noises, NoiseBankSpec, NoiseFamilies, FAMILIES_FILE};
pub use split::{build_splits, count_cells, train_conditions, CellCount, SplitPlan, CLASSES_FILE};
pub use synth::{generate_corpus, CorpusSpec, WORDS};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {detail}")]
    Parse { path: PathBuf, line: usize, detail: String },
    #[error("path not found: {0}")]
    MissingPath(PathBuf),
    #[error("invalid data plan: {0}")]
    Plan(String),
    #[error("corpus provides {found} classes, {needed} required")]
    InsufficientClasses { found: usize, needed: usize },
    #[error("noise set {set} has no usable {noise_type:?} recording")]
    EmptyFamily { set: String, noise_type: String },
    #[error("split {0} has no entries")]
    EmptySplit(Split),
    #[error(transparent)]
    Signal(#[from] crate::signal::SignalError),
    #[error(transparent)]
    Ns(#[from] crate::neutrosophic::NsError),
}

impl DataError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, DataError>;
