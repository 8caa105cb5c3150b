//! Noise-robust isolated-word recognition with neutrosophic indeterminacy maps.
//!
//! The pipeline turns audio into log-magnitude spectrograms ([`signal`]),
//! derives a per-cell indeterminacy map from each spectrogram
//! ([`neutrosophic`]) and classifies the pair with a two-path CNN whose
//! posteriors are fused by product, sum or maximum ([`model`]). The
//! [`tensor`] module is the small autodiff kernel behind the networks;
//! [`data`] and [`harness`] build multi-condition corpora and run the
//! training/evaluation experiments.

pub mod data;
pub mod grid;
pub mod harness;
pub mod model;
pub mod neutrosophic;
pub mod signal;
pub mod tensor;
