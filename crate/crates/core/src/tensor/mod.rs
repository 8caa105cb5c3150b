//! Dense `f64` tensors and a small reverse-mode autodiff kernel.
//!
//! The free functions in the submodules are pure forward/backward pairs; the
//! [`Tape`] records a graph of them and replays the backward passes in
//! reverse order. Layouts are row-major; feature maps are `[H, W, C]`.

mod activation;
mod conv;
mod dense;
mod gemm;
mod gradcheck;
mod loss;
mod optim;
mod pool;
mod tape;

pub use activation::{relu_backward, relu_forward, tanh_backward, tanh_forward};
pub use conv::{conv2d_backward, conv2d_forward, conv2d_forward_cached, ConvCache, ConvGrads, ConvSpec};
pub use dense::{dense_backward, dense_forward, DenseGrads};
pub use gradcheck::{check_gradients, grad_check, GradCheckReport, InputCheck};
pub use loss::{softmax, softmax_cross_entropy, softmax_cross_entropy_backward};
pub use optim::sgd_step;
pub use pool::{max_pool_backward, max_pool_forward, PoolSpec};
pub use tape::{Gradients, Tape, Var};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("shape {shape:?} holds {expected} values but {actual} were supplied")]
    LengthMismatch {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("{op}: output would have zero size ({detail})")]
    EmptyOutput { op: &'static str, detail: String },
    #[error("{op}: invalid spec: {detail}")]
    InvalidSpec { op: &'static str, detail: String },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("backward requires a recorded forward pass")]
    MissingForwardContext,
    #[error("parameter {index} has no gradient")]
    MissingGradient { index: usize },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Row-major array with an optional gradient slot of the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expected = shape.iter().product::<usize>();
        if expected != values.len() {
            return Err(TensorError::LengthMismatch {
                shape,
                expected,
                actual: values.len(),
            });
        }
        Ok(Self {
            shape,
            values,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            values: vec![0.0; n],
            grad: None,
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self {
            shape: vec![values.len()],
            values,
            grad: None,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_vec(vec![value])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    /// Adds `g` into the gradient slot, allocating it on first use.
    pub fn accumulate_grad(&mut self, g: &[f64]) -> Result<()> {
        if g.len() != self.values.len() {
            return Err(TensorError::ShapeMismatch {
                op: "accumulate_grad",
                detail: format!("gradient has {} values, tensor {}", g.len(), self.values.len()),
            });
        }
        let slot = self.grad.get_or_insert_with(|| vec![0.0; g.len()]);
        for (s, v) in slot.iter_mut().zip(g) {
            *s += v;
        }
        Ok(())
    }

    pub fn scale_grad(&mut self, factor: f64) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    pub(crate) fn grad_and_values_mut(&mut self) -> (Option<&mut Vec<f64>>, &mut Vec<f64>) {
        (self.grad.as_mut(), &mut self.values)
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let expected = shape.iter().product::<usize>();
        if expected != self.values.len() {
            return Err(TensorError::LengthMismatch {
                shape,
                expected,
                actual: self.values.len(),
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn hwc(t: &Tensor, op: &'static str) -> Result<[usize; 3]> {
    match *t.shape() {
        [h, w, c] => Ok([h, w, c]),
        _ => Err(TensorError::ShapeMismatch {
            op,
            detail: format!("expected a [H, W, C] tensor, got {:?}", t.shape()),
        }),
    }
}
