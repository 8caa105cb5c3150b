//! Parallel, order-independent evaluation.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;

use super::report::{EvalReport, EvalRow};
use super::{FeatureSource, HarnessError, Result};
use crate::data::{ManifestEntry, CLEAN};
use crate::model::Classifier;

/// Labels attached to every row of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalContext {
    pub experiment: String,
    pub variant: String,
    pub train_condition: String,
}

#[derive(PartialEq)]
struct CellKey {
    set: String,
    noise: String,
    snr: Option<f64>,
}

impl Eq for CellKey {}

impl Ord for CellKey {
    /// Set, then clean before noises (alphabetical), then SNR descending.
    fn cmp(&self, o: &Self) -> Ordering {
        self.set
            .cmp(&o.set)
            .then_with(|| (self.noise != CLEAN).cmp(&(o.noise != CLEAN)))
            .then_with(|| self.noise.cmp(&o.noise))
            .then_with(|| match (self.snr, o.snr) {
                (Some(a), Some(b)) => b.total_cmp(&a),
                (a, b) => a.is_some().cmp(&b.is_some()),
            })
    }
}

impl PartialOrd for CellKey {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Accuracy per `(test set, noise type, SNR)` cell over `entries`, which must be test entries.
pub fn evaluate(
    model: &Classifier,
    entries: &[&ManifestEntry],
    source: &FeatureSource,
    ctx: &EvalContext,
) -> Result<EvalReport> {
    if entries.is_empty() {
        return Err(HarnessError::Empty("evaluate"));
    }
    let window = model.ns_window();
    let hits = entries
        .par_iter()
        .map(|e| Ok(model.predict(&source.inputs(e, window)?)?.class == e.label))
        .collect::<Result<Vec<bool>>>()?;
    let mut cells: BTreeMap<CellKey, (usize, usize)> = BTreeMap::new();
    for (e, hit) in entries.iter().zip(hits) {
        let set = e
            .split
            .test_set()
            .ok_or_else(|| HarnessError::Config(format!("{} is not a test entry", e.utterance_id)))?;
        let c = cells
            .entry(CellKey {
                set: set.into(),
                noise: e.noise_type.clone(),
                snr: e.snr_db,
            })
            .or_default();
        c.0 += usize::from(hit);
        c.1 += 1;
    }
    let rows = cells
        .into_iter()
        .map(|(k, (correct, n))| EvalRow {
            experiment: ctx.experiment.clone(),
            model: model.kind().label().into(),
            variant: ctx.variant.clone(),
            train_condition: ctx.train_condition.clone(),
            seed: model.seed(),
            test_set: k.set,
            noise_type: k.noise,
            snr_db: k.snr,
            correct,
            n,
        })
        .collect();
    Ok(EvalReport {
        rows,
        meta: Default::default(),
    })
}
