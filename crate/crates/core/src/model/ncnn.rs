use serde::{Deserialize, Serialize};

use super::cnn::{build_cnn, build_cnn_on_stream, Cnn};
use super::config::ArchitectureConfig;
use super::fusion::{argmax, combine, fused_loss, CombinationRule};
use super::{ModelError, Result};
use crate::neutrosophic::{NeutrosophicMap, NsWindow};
use crate::signal::Spectrogram;
use crate::tensor::{softmax, softmax_cross_entropy, Tape, Tensor, TensorError};

/// Spectrogram path plus indeterminacy path, fused at the posterior level.
#[derive(Debug, Clone, PartialEq)]
pub struct NcnnModel {
    pub path_spec: Cnn,
    pub path_ind: Cnn,
    pub rule: CombinationRule,
    pub ns_window: NsWindow,
}

/// The spectrogram path reuses the single-path initialisation for `seed`;
/// the indeterminacy path draws from an independent stream.
pub fn build_ncnn(cfg: &ArchitectureConfig, seed: u64, rule: CombinationRule, ns_window: NsWindow) -> Result<NcnnModel> {
    Ok(NcnnModel {
        path_spec: build_cnn(cfg, seed)?,
        path_ind: build_cnn_on_stream(cfg, seed, 1)?,
        rule,
        ns_window,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub posterior: Vec<f64>,
}

/// Per-utterance standardisation (zero mean, unit variance) as a `[frames, bins, 1]` tensor.
/// A constant spectrogram maps to zeros.
pub fn spectrogram_tensor(spec: &Spectrogram) -> Tensor {
    let g = &spec.grid;
    let mean = g.mean();
    let var = g.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / g.data().len() as f64;
    let sd = var.sqrt();
    let values = if sd < 1e-12 {
        vec![0.0; g.data().len()]
    } else {
        g.data().iter().map(|v| (v - mean) / sd).collect()
    };
    Tensor::new(vec![g.rows(), g.cols(), 1], values).expect("grid dims match")
}

/// The indeterminacy grid as a `[frames, bins, 1]` tensor, unscaled.
pub fn indeterminacy_tensor(map: &NeutrosophicMap) -> Tensor {
    let g = &map.indeterminacy;
    Tensor::new(vec![g.rows(), g.cols(), 1], g.data().to_vec()).expect("grid dims match")
}

impl NcnnModel {
    pub fn predict_tensors(&self, spec: &Tensor, ind: &Tensor) -> Result<Prediction> {
        if spec.shape() != ind.shape() {
            return Err(ModelError::InputShape {
                expected: spec.shape().to_vec(),
                actual: ind.shape().to_vec(),
            });
        }
        let pa = self.path_spec.forward_posteriors(spec)?;
        let pb = self.path_ind.forward_posteriors(ind)?;
        let posterior = combine(&pa, &pb, self.rule)?;
        Ok(Prediction {
            class: argmax(&posterior),
            posterior,
        })
    }

    /// `spec` must already be fitted to the network's input grid and `imap` derived from it.
    pub fn predict(&self, spec: &Spectrogram, imap: &NeutrosophicMap) -> Result<Prediction> {
        if spec.grid.dims() != imap.indeterminacy.dims() {
            return Err(ModelError::InputShape {
                expected: vec![spec.grid.rows(), spec.grid.cols()],
                actual: vec![imap.indeterminacy.rows(), imap.indeterminacy.cols()],
            });
        }
        self.predict_tensors(&spectrogram_tensor(spec), &indeterminacy_tensor(imap))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cnn,
    Ncnn,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Cnn => "CNN",
            ModelKind::Ncnn => "NCNN",
        }
    }
}

/// Network inputs for one utterance; `indeterminacy` is required by the two-path model only.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInputs {
    pub spectrogram: Tensor,
    pub indeterminacy: Option<Tensor>,
}

/// Loss and flattened parameter gradients of one example, in [`Classifier::params`] order.
#[derive(Debug, Clone)]
pub struct SampleGradients {
    pub loss: f64,
    pub correct: bool,
    pub grads: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Cnn(Cnn),
    Ncnn(NcnnModel),
}

impl Classifier {
    pub fn kind(&self) -> ModelKind {
        match self {
            Classifier::Cnn(_) => ModelKind::Cnn,
            Classifier::Ncnn(_) => ModelKind::Ncnn,
        }
    }

    pub fn config(&self) -> &ArchitectureConfig {
        match self {
            Classifier::Cnn(c) => c.config(),
            Classifier::Ncnn(m) => m.path_spec.config(),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Classifier::Cnn(c) => c.seed(),
            Classifier::Ncnn(m) => m.path_spec.seed(),
        }
    }

    pub fn rule(&self) -> Option<CombinationRule> {
        match self {
            Classifier::Cnn(_) => None,
            Classifier::Ncnn(m) => Some(m.rule),
        }
    }

    pub fn ns_window(&self) -> Option<NsWindow> {
        match self {
            Classifier::Cnn(_) => None,
            Classifier::Ncnn(m) => Some(m.ns_window),
        }
    }

    pub fn needs_indeterminacy(&self) -> bool {
        matches!(self, Classifier::Ncnn(_))
    }

    /// Named paths in parameter order.
    pub fn paths(&self) -> Vec<(&'static str, &Cnn)> {
        match self {
            Classifier::Cnn(c) => vec![("spectrogram", c)],
            Classifier::Ncnn(m) => vec![("spectrogram", &m.path_spec), ("indeterminacy", &m.path_ind)],
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.paths().into_iter().flat_map(|(_, p)| p.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Classifier::Cnn(c) => c.params_mut().iter_mut().collect(),
            Classifier::Ncnn(m) => m
                .path_spec
                .params_mut()
                .iter_mut()
                .chain(m.path_ind.params_mut().iter_mut())
                .collect(),
        }
    }

    fn indeterminacy<'x>(&self, x: &'x ModelInputs) -> Result<&'x Tensor> {
        x.indeterminacy
            .as_ref()
            .ok_or_else(|| ModelError::Config("two-path model needs an indeterminacy input".into()))
    }

    pub fn predict(&self, x: &ModelInputs) -> Result<Prediction> {
        match self {
            Classifier::Cnn(c) => {
                let posterior = c.forward_posteriors(&x.spectrogram)?;
                Ok(Prediction {
                    class: argmax(&posterior),
                    posterior,
                })
            }
            Classifier::Ncnn(m) => m.predict_tensors(&x.spectrogram, self.indeterminacy(x)?),
        }
    }

    /// Cross-entropy on the (fused) posterior, backpropagated into every parameter.
    pub fn loss_and_gradients(&self, x: &ModelInputs, label: usize) -> Result<SampleGradients> {
        let collect = |tape: &Tape<'_>, seeds: Vec<(crate::tensor::Var, Vec<f64>)>, params: &[crate::tensor::Var]| {
            let grads = tape.backward_from(&seeds)?;
            Ok::<_, ModelError>(
                params
                    .iter()
                    .map(|v| {
                        grads
                            .get(*v)
                            .map_or_else(|| vec![0.0; tape.value(*v).len()], <[f64]>::to_vec)
                    })
                    .collect::<Vec<_>>(),
            )
        };
        match self {
            Classifier::Cnn(c) => {
                let mut tape = Tape::new();
                let input = tape.constant(&x.spectrogram);
                let out = c.forward_on(&mut tape, input)?;
                let z = tape.value(out.logits).values();
                let (loss, mut dz) = softmax_cross_entropy(z, label)?;
                let correct = argmax(&dz) == label;
                dz[label] -= 1.0;
                check_finite(loss)?;
                let grads = collect(&tape, vec![(out.logits, dz)], &out.params)?;
                Ok(SampleGradients { loss, correct, grads })
            }
            Classifier::Ncnn(m) => {
                let ind = self.indeterminacy(x)?;
                let mut tape_a = Tape::new();
                let ia = tape_a.constant(&x.spectrogram);
                let out_a = m.path_spec.forward_on(&mut tape_a, ia)?;
                let mut tape_b = Tape::new();
                let ib = tape_b.constant(ind);
                let out_b = m.path_ind.forward_on(&mut tape_b, ib)?;
                let fused = fused_loss(
                    tape_a.value(out_a.logits).values(),
                    tape_b.value(out_b.logits).values(),
                    label,
                    m.rule,
                )?;
                check_finite(fused.loss)?;
                let correct = argmax(&fused.combined) == label;
                let mut grads = collect(&tape_a, vec![(out_a.logits, fused.grad_a)], &out_a.params)?;
                grads.extend(collect(&tape_b, vec![(out_b.logits, fused.grad_b)], &out_b.params)?);
                Ok(SampleGradients {
                    loss: fused.loss,
                    correct,
                    grads,
                })
            }
        }
    }

    /// Posterior of the spectrogram path alone.
    pub fn spectrogram_posterior(&self, x: &ModelInputs) -> Result<Vec<f64>> {
        let path = self.paths()[0].1;
        Ok(softmax(&path.logits(&x.spectrogram)?))
    }
}

fn check_finite(loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(ModelError::Tensor(TensorError::NonFinite { op: "loss" }))
    }
}
