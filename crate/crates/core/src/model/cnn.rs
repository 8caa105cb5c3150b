use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Activation, ArchitectureConfig, LayerOp};
use super::{ModelError, Result};
use crate::tensor::{softmax, Tape, Tensor, Var};

/// One convolutional path: configuration plus `[weights, bias]` for every conv/dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Cnn {
    config: ArchitectureConfig,
    params: Vec<Tensor>,
    seed: u64,
}

/// Nodes created by [`Cnn::forward_on`].
#[derive(Debug, Clone)]
pub struct PathVars {
    pub logits: Var,
    /// Parallel to [`Cnn::params`].
    pub params: Vec<Var>,
}

/// Weight shape, bias shape, fan-in, fan-out.
type ParamShape = (Vec<usize>, Vec<usize>, usize, usize);

/// Parameter shapes in layer order, with Glorot fans for each weight.
fn param_layout(cfg: &ArchitectureConfig) -> Result<Vec<ParamShape>> {
    let chain = cfg.shape_chain()?;
    let mut input = cfg.input_shape();
    let mut layout = Vec::new();
    for (layer, out) in cfg.layers.iter().zip(&chain) {
        match layer.op {
            LayerOp::Conv { filters, kernel, .. } => {
                let c = input[2];
                let area = kernel[0] * kernel[1];
                layout.push((vec![kernel[0], kernel[1], c, filters], vec![filters], area * c, area * filters));
            }
            LayerOp::Dense { units, .. } => {
                let n: usize = input.iter().product();
                layout.push((vec![n, units], vec![units], n, units));
            }
            LayerOp::Pool { .. } => {}
        }
        input = out.clone();
    }
    Ok(layout)
}

/// Weights uniform in ±sqrt(6 / (fan_in + fan_out)); biases zero.
pub fn build_cnn(cfg: &ArchitectureConfig, seed: u64) -> Result<Cnn> {
    build_cnn_on_stream(cfg, seed, 0)
}

/// As [`build_cnn`], drawing from ChaCha stream `stream` so sibling paths stay independent.
pub fn build_cnn_on_stream(cfg: &ArchitectureConfig, seed: u64, stream: u64) -> Result<Cnn> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut params = Vec::new();
    for (w_shape, b_shape, fan_in, fan_out) in param_layout(cfg)? {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n: usize = w_shape.iter().product();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-limit..limit)).collect();
        params.push(Tensor::new(w_shape, w)?);
        params.push(Tensor::zeros(&b_shape));
    }
    Ok(Cnn {
        config: cfg.clone(),
        params,
        seed,
    })
}

impl Cnn {
    /// Reassembles a network from stored parameters, checking every shape.
    pub fn from_params(cfg: &ArchitectureConfig, seed: u64, params: Vec<Tensor>) -> Result<Self> {
        let expected: Vec<Vec<usize>> = param_layout(cfg)?
            .into_iter()
            .flat_map(|(w, b, _, _)| [w, b])
            .collect();
        if expected.len() != params.len() {
            return Err(ModelError::Checkpoint(format!(
                "expected {} parameter tensors, found {}",
                expected.len(),
                params.len()
            )));
        }
        for (i, (shape, p)) in expected.iter().zip(&params).enumerate() {
            if p.shape() != shape.as_slice() {
                return Err(ModelError::Checkpoint(format!(
                    "parameter {i} has shape {:?}, architecture needs {shape:?}",
                    p.shape()
                )));
            }
        }
        Ok(Self {
            config: cfg.clone(),
            params,
            seed,
        })
    }

    pub fn config(&self) -> &ArchitectureConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Zeroes the final layer so every input maps to the uniform posterior.
    pub fn zero_output_layer(&mut self) {
        let n = self.params.len();
        for p in &mut self.params[n - 2..] {
            p.values_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.shape() != self.config.input.as_slice() {
            return Err(ModelError::InputShape {
                expected: self.config.input.to_vec(),
                actual: input.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Records the network on `tape`, reading parameters in place.
    pub fn forward_on<'a>(&'a self, tape: &mut Tape<'a>, input: Var) -> Result<PathVars> {
        self.check_input(tape.value(input))?;
        let mut x = input;
        let mut params = self.params.iter();
        let mut vars = Vec::with_capacity(self.params.len());
        for layer in &self.config.layers {
            match layer.op {
                LayerOp::Pool { .. } => {
                    x = tape.max_pool(x, layer.op.pool_spec().expect("pool layer"))?;
                    continue;
                }
                LayerOp::Conv { .. } | LayerOp::Dense { .. } => {
                    let w = tape.param(params.next().expect("weights per layout"));
                    let b = tape.param(params.next().expect("bias per layout"));
                    vars.extend([w, b]);
                    x = match layer.op.conv_spec() {
                        Some(spec) => tape.conv2d(x, w, b, spec)?,
                        None => tape.dense(x, w, b)?,
                    };
                }
            }
            x = match layer.op.activation() {
                Activation::Tanh => tape.tanh(x),
                Activation::Relu => tape.relu(x),
                Activation::Identity => x,
            };
        }
        Ok(PathVars { logits: x, params: vars })
    }

    pub fn logits(&self, input: &Tensor) -> Result<Vec<f64>> {
        let mut tape = Tape::inference();
        let x = tape.constant(input);
        let out = self.forward_on(&mut tape, x)?;
        let z = tape.value(out.logits);
        if !z.all_finite() {
            return Err(ModelError::Tensor(crate::tensor::TensorError::NonFinite { op: "forward" }));
        }
        Ok(z.values().to_vec())
    }

    pub fn forward_posteriors(&self, input: &Tensor) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(input)?))
    }
}
