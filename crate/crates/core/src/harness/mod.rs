//! Training, evaluation, reporting and the experiment sweeps.

pub mod eval;
pub mod experiment;
pub mod report;
pub mod train;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::data::{AudioStore, DataError, FeatureConfig, ManifestEntry};
use crate::model::{ModelError, ModelInputs};
use crate::neutrosophic::NsWindow;

pub use eval::{evaluate, EvalContext};
pub use experiment::{
    run_main, sweep_combination, sweep_window, window_label, ExperimentConfig, ExperimentOutput, SWEEP_WINDOWS,
};
pub use report::{CheckpointRecord, EvalReport, EvalRow, GroupKey, ReportMeta};
pub use train::{subset_accuracy, train, Hyperparams, TrainLogRow, TrainOutcome};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite loss at iteration {iteration}")]
    NonFinite { iteration: u64 },
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("nothing to {0}: no entries selected")]
    Empty(&'static str),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed report: {detail}")]
    Report { path: PathBuf, detail: String },
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Audio store plus feature geometry: everything needed to turn an entry into network inputs.
pub struct FeatureSource {
    pub store: AudioStore,
    pub features: FeatureConfig,
}

impl FeatureSource {
    pub fn new(store: AudioStore, features: FeatureConfig) -> Self {
        Self { store, features }
    }

    pub fn inputs(&self, entry: &ManifestEntry, window: Option<NsWindow>) -> Result<ModelInputs> {
        Ok(self.store.inputs(entry, &self.features, window)?)
    }
}
