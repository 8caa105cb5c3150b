//! Single-path CNN, the two-path spectrogram/indeterminacy network, posterior
//! fusion and parameter checkpoints.

mod checkpoint;
mod cnn;
mod config;
mod fusion;
mod ncnn;
mod shapes;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, sha256_hex, CheckpointHeader,
    LoadedCheckpoint, TensorEntry,
};
pub use cnn::{build_cnn, build_cnn_on_stream, Cnn, PathVars};
pub use config::{Activation, ArchitectureConfig, LayerConfig, LayerOp};
pub use fusion::{argmax, combine, fused_loss, CombinationRule, FusedLoss, LOG_FLOOR};
pub use ncnn::{
    build_ncnn, indeterminacy_tensor, spectrogram_tensor, Classifier, ModelInputs, ModelKind, NcnnModel, Prediction,
    SampleGradients,
};
pub use shapes::{shape_report, Candidate, RowStatus, ShapeReport, ShapeRow};

use thiserror::Error;

use crate::neutrosophic::NsError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("architecture config: {0}")]
    Config(String),
    #[error("shape chain breaks at layer {layer}: {detail}")]
    ShapeChain { layer: usize, detail: String },
    #[error("input shape {actual:?} does not match the network input {expected:?}")]
    InputShape { expected: Vec<usize>, actual: Vec<usize> },
    #[error("{what} length mismatch: {expected} vs {actual}")]
    DimMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("not a probability distribution: {0}")]
    NotDistribution(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Ns(#[from] NsError),
}

pub type Result<T> = std::result::Result<T, ModelError>;
