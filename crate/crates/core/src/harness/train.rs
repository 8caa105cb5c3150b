//! Mini-batch SGD over manifest entries.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FeatureSource, HarnessError, Result};
use crate::data::{epoch_batches, ManifestEntry};
use crate::model::{Classifier, ModelError};
use crate::tensor::TensorError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub batch_size: usize,
    pub max_iterations: u64,
    pub learning_rate: f64,
    /// Multiplier applied every `lr_decay_every` iterations.
    pub lr_decay: f64,
    pub lr_decay_every: u64,
    pub seed: u64,
    /// Iterations between full-subset accuracy checks; 0 disables them.
    pub log_every: u64,
    /// Stop once a full-subset accuracy check reaches this percentage; 0 disables.
    pub target_train_accuracy: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            batch_size: 32,
            max_iterations: 3000,
            learning_rate: 0.01,
            lr_decay: 0.5,
            lr_decay_every: 1000,
            seed: 1,
            log_every: 100,
            target_train_accuracy: 0.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Hyperparams(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must lie in (0, 1]");
        }
        if self.lr_decay_every == 0 {
            return bad("lr_decay_every must be positive");
        }
        if !(0.0..=100.0).contains(&self.target_train_accuracy) {
            return bad("target_train_accuracy must lie in [0, 100]");
        }
        Ok(())
    }

    /// Step-decayed learning rate for zero-based `iteration`.
    pub fn lr_at(&self, iteration: u64) -> f64 {
        self.learning_rate * self.lr_decay.powi((iteration / self.lr_decay_every) as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    /// One-based iteration number.
    pub iteration: u64,
    /// Mean batch loss before the update.
    pub loss: f64,
    pub lr: f64,
    /// Percentage of the batch classified correctly before the update.
    pub batch_accuracy: f64,
    /// Accuracy over the whole training subset after the update, on check iterations.
    pub train_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub iterations: u64,
    pub log: Vec<TrainLogRow>,
    pub reached_target: bool,
}

impl TrainOutcome {
    pub fn log_csv(&self) -> String {
        let mut out = String::from("iteration,loss,lr,batch_accuracy,train_accuracy\n");
        for r in &self.log {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.iteration,
                r.loss,
                r.lr,
                r.batch_accuracy,
                r.train_accuracy.map_or(String::new(), |a| a.to_string())
            ));
        }
        out
    }
}

/// Percentage of `entries` the model classifies correctly.
pub fn subset_accuracy(model: &Classifier, entries: &[&ManifestEntry], source: &FeatureSource) -> Result<f64> {
    let window = model.ns_window();
    let correct = entries
        .par_iter()
        .map(|e| Ok(usize::from(model.predict(&source.inputs(e, window)?)?.class == e.label)))
        .collect::<Result<Vec<usize>>>()?;
    Ok(100.0 * correct.iter().sum::<usize>() as f64 / entries.len() as f64)
}

/// Trains `model` in place. Per-sample gradients are computed in parallel and
/// summed in batch order, so results do not depend on the worker count.
pub fn train(
    model: &mut Classifier,
    entries: &[&ManifestEntry],
    source: &FeatureSource,
    hp: &Hyperparams,
) -> Result<TrainOutcome> {
    hp.validate()?;
    if entries.is_empty() {
        return Err(HarnessError::Empty("train"));
    }
    let window = model.ns_window();
    let mut log = Vec::new();
    let mut epoch = 0;
    let mut pending = epoch_batches(entries.len(), hp.batch_size, hp.seed, epoch).into_iter();
    for it in 0..hp.max_iterations {
        let batch = match pending.next() {
            Some(b) => b,
            None => {
                epoch += 1;
                pending = epoch_batches(entries.len(), hp.batch_size, hp.seed, epoch).into_iter();
                pending.next().expect("non-empty epoch")
            }
        };
        let frozen = &*model;
        let samples = batch
            .par_iter()
            .map(|&i| {
                let e = entries[i];
                let x = source.inputs(e, window)?;
                frozen.loss_and_gradients(&x, e.label).map_err(|err| match err {
                    ModelError::Tensor(TensorError::NonFinite { .. }) => HarnessError::NonFinite { iteration: it + 1 },
                    other => other.into(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let n = samples.len() as f64;
        let loss = samples.iter().map(|s| s.loss).sum::<f64>() / n;
        if !loss.is_finite() {
            return Err(HarnessError::NonFinite { iteration: it + 1 });
        }
        let correct = samples.iter().filter(|s| s.correct).count();
        let lr = hp.lr_at(it);
        let mut params = model.params_mut();
        for (k, p) in params.iter_mut().enumerate() {
            let values = p.values_mut();
            for (j, v) in values.iter_mut().enumerate() {
                let g: f64 = samples.iter().map(|s| s.grads[k][j]).sum::<f64>() / n;
                *v -= lr * g;
            }
        }
        let mut row = TrainLogRow {
            iteration: it + 1,
            loss,
            lr,
            batch_accuracy: 100.0 * correct as f64 / n,
            train_accuracy: None,
        };
        let check = hp.log_every > 0 && (it + 1) % hp.log_every == 0;
        let targeted = hp.target_train_accuracy > 0.0;
        if check || (targeted && it + 1 == hp.max_iterations) {
            let acc = subset_accuracy(model, entries, source)?;
            row.train_accuracy = Some(acc);
            log.push(row);
            if targeted && acc >= hp.target_train_accuracy {
                return Ok(TrainOutcome {
                    iterations: it + 1,
                    log,
                    reached_target: true,
                });
            }
        } else {
            log.push(row);
        }
    }
    Ok(TrainOutcome {
        iterations: hp.max_iterations,
        log,
        reached_target: false,
    })
}
