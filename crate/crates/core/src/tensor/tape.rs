use std::borrow::Cow;

use super::{
    conv2d_backward, conv2d_forward_cached, dense_backward, dense_forward, max_pool_backward, max_pool_forward,
    relu_backward, relu_forward, softmax_cross_entropy, softmax_cross_entropy_backward, tanh_backward, tanh_forward,
    ConvCache, ConvSpec, PoolSpec, Result, Tensor, TensorError,
};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv {
        input: Var,
        weights: Var,
        bias: Var,
        spec: ConvSpec,
        cache: Option<ConvCache>,
    },
    MaxPool {
        input: Var,
        argmax: Option<Vec<usize>>,
    },
    Dense {
        input: Var,
        weights: Var,
        bias: Var,
    },
    Tanh {
        input: Var,
    },
    Relu {
        input: Var,
    },
    /// Scalar `Σ coeffs·x`; used to reduce tensors to a loss in tests.
    Project {
        input: Var,
        coeffs: Vec<f64>,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        label: usize,
        probs: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Records forward operations so gradients can be replayed in reverse.
///
/// Nodes are appended in evaluation order, which is already a topological
/// order. Parameters are borrowed, never copied. A tape built with
/// [`Tape::inference`] keeps no backward state and refuses `backward`.
#[derive(Debug)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
    record: bool,
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            record: true,
        }
    }

    pub fn inference() -> Self {
        Self {
            nodes: Vec::new(),
            record: false,
        }
    }

    pub fn is_recording(&self) -> bool {
        self.record
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'a, Tensor>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad: requires_grad && self.record,
        });
        Var(self.nodes.len() - 1)
    }

    fn derived(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(Cow::Owned(value), op, rg)
    }

    /// Owned leaf; `requires_grad` marks it for gradient collection.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(Cow::Owned(value), Op::Leaf, requires_grad)
    }

    /// Borrowed trainable parameter.
    pub fn param(&mut self, value: &'a Tensor) -> Var {
        self.push(Cow::Borrowed(value), Op::Leaf, true)
    }

    /// Borrowed constant input.
    pub fn constant(&mut self, value: &'a Tensor) -> Var {
        self.push(Cow::Borrowed(value), Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn conv2d(&mut self, input: Var, weights: Var, bias: Var, spec: ConvSpec) -> Result<Var> {
        let (out, cache) = conv2d_forward_cached(self.value(input), &spec, self.value(weights), self.value(bias))?;
        let cache = self.record.then_some(cache);
        Ok(self.derived(
            out,
            Op::Conv {
                input,
                weights,
                bias,
                spec,
                cache,
            },
            &[input, weights, bias],
        ))
    }

    pub fn max_pool(&mut self, input: Var, spec: PoolSpec) -> Result<Var> {
        let (out, argmax) = max_pool_forward(self.value(input), &spec)?;
        let argmax = self.record.then_some(argmax);
        Ok(self.derived(out, Op::MaxPool { input, argmax }, &[input]))
    }

    pub fn dense(&mut self, input: Var, weights: Var, bias: Var) -> Result<Var> {
        let out = dense_forward(self.value(input), self.value(weights), self.value(bias))?;
        Ok(self.derived(out, Op::Dense { input, weights, bias }, &[input, weights, bias]))
    }

    pub fn tanh(&mut self, input: Var) -> Var {
        let out = tanh_forward(self.value(input));
        self.derived(out, Op::Tanh { input }, &[input])
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let out = relu_forward(self.value(input));
        self.derived(out, Op::Relu { input }, &[input])
    }

    pub fn project(&mut self, input: Var, coeffs: Vec<f64>) -> Result<Var> {
        let x = self.value(input);
        if x.len() != coeffs.len() {
            return Err(TensorError::ShapeMismatch {
                op: "project",
                detail: format!("{} values vs {} coefficients", x.len(), coeffs.len()),
            });
        }
        let s = x.values().iter().zip(&coeffs).map(|(a, b)| a * b).sum();
        Ok(self.derived(Tensor::scalar(s), Op::Project { input, coeffs }, &[input]))
    }

    pub fn softmax_cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var> {
        let (loss, probs) = softmax_cross_entropy(self.value(logits).values(), label)?;
        Ok(self.derived(Tensor::scalar(loss), Op::SoftmaxCrossEntropy { logits, label, probs }, &[logits]))
    }

    /// Backpropagates from a scalar node seeded with 1.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "backward",
                detail: format!("loss must be scalar, got {:?}", self.value(loss).shape()),
            });
        }
        self.backward_from(&[(loss, vec![1.0])])
    }

    /// Backpropagates from arbitrary seed gradients on one or more nodes.
    pub fn backward_from(&self, seeds: &[(Var, Vec<f64>)]) -> Result<Gradients> {
        if !self.record {
            return Err(TensorError::MissingForwardContext);
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        let mut start = 0;
        for (v, g) in seeds {
            if g.len() != self.value(*v).len() {
                return Err(TensorError::ShapeMismatch {
                    op: "backward",
                    detail: format!("seed of {} values for node of {}", g.len(), self.value(*v).len()),
                });
            }
            add_into(&mut grads[v.0], g);
            start = start.max(v.0 + 1);
        }
        for idx in (0..start).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(upstream) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &upstream, &mut grads)?;
            grads[idx] = Some(upstream);
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node<'a>, g: &[f64], grads: &mut [Option<Vec<f64>>]) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::Conv {
                input,
                weights,
                bias,
                spec,
                cache,
            } => {
                let cache = cache.as_ref().ok_or(TensorError::MissingForwardContext)?;
                let r = conv2d_backward(cache, spec, self.value(*weights), g, self.wants(*input))?;
                if let Some(dx) = r.input {
                    add_into(&mut grads[input.0], dx.values());
                }
                if self.wants(*weights) {
                    add_into(&mut grads[weights.0], r.weights.values());
                }
                if self.wants(*bias) {
                    add_into(&mut grads[bias.0], r.bias.values());
                }
            }
            Op::MaxPool { input, argmax } => {
                let argmax = argmax.as_ref().ok_or(TensorError::MissingForwardContext)?;
                if self.wants(*input) {
                    let dx = max_pool_backward(self.value(*input).shape(), argmax, g)?;
                    add_into(&mut grads[input.0], dx.values());
                }
            }
            Op::Dense { input, weights, bias } => {
                let r = dense_backward(self.value(*input), self.value(*weights), g)?;
                if self.wants(*input) {
                    add_into(&mut grads[input.0], r.input.values());
                }
                if self.wants(*weights) {
                    add_into(&mut grads[weights.0], r.weights.values());
                }
                if self.wants(*bias) {
                    add_into(&mut grads[bias.0], r.bias.values());
                }
            }
            Op::Tanh { input } => {
                let dx = tanh_backward(&node.value, g)?;
                add_into(&mut grads[input.0], dx.values());
            }
            Op::Relu { input } => {
                let dx = relu_backward(self.value(*input), g)?;
                add_into(&mut grads[input.0], dx.values());
            }
            Op::Project { input, coeffs } => {
                let dx: Vec<f64> = coeffs.iter().map(|c| c * g[0]).collect();
                add_into(&mut grads[input.0], &dx);
            }
            Op::SoftmaxCrossEntropy { logits, label, probs } => {
                let dz = softmax_cross_entropy_backward(probs, *label, g[0]);
                add_into(&mut grads[logits.0], &dz);
            }
        }
        Ok(())
    }
}

fn add_into(slot: &mut Option<Vec<f64>>, g: &[f64]) {
    match slot {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        None => *slot = Some(g.to_vec()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inference_tape_refuses_backward() {
        let w = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = Tensor::zeros(&[2]);
        let mut tape = Tape::inference();
        let x = tape.leaf(Tensor::from_vec(vec![1.0, 2.0]), false);
        let (wv, bv) = (tape.param(&w), tape.param(&b));
        let y = tape.dense(x, wv, bv).unwrap();
        let loss = tape.softmax_cross_entropy(y, 0).unwrap();
        assert_eq!(tape.backward(loss).unwrap_err(), TensorError::MissingForwardContext);
    }

    #[test]
    fn shared_input_accumulates() {
        // loss = 2·tanh(x)·1 + 3·tanh(x)... via two projections of one node.
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(0.0), true);
        let t = tape.tanh(x);
        let a = tape.project(t, vec![2.0]).unwrap();
        let b = tape.project(t, vec![3.0]).unwrap();
        let ga = tape.backward_from(&[(a, vec![1.0]), (b, vec![1.0])]).unwrap();
        assert_eq!(ga.get(x).unwrap(), &[5.0]);
    }

    #[test]
    fn constants_get_no_gradient() {
        let c = Tensor::from_vec(vec![1.0, -1.0]);
        let mut tape = Tape::new();
        let x = tape.constant(&c);
        let y = tape.relu(x);
        let l = tape.project(y, vec![1.0, 1.0]).unwrap();
        let g = tape.backward(l).unwrap();
        assert!(g.get(x).is_none());
    }
}
