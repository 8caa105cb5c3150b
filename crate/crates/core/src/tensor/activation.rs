use super::{Result, Tensor, TensorError};

pub fn tanh_forward(input: &Tensor) -> Tensor {
    map(input, f64::tanh)
}

/// Uses the forward output: d tanh = 1 − y².
pub fn tanh_backward(output: &Tensor, upstream: &[f64]) -> Result<Tensor> {
    zip(output, upstream, "tanh_backward", |y, g| g * (1.0 - y * y))
}

pub fn relu_forward(input: &Tensor) -> Tensor {
    map(input, |v| if v > 0.0 { v } else { 0.0 })
}

pub fn relu_backward(input: &Tensor, upstream: &[f64]) -> Result<Tensor> {
    zip(input, upstream, "relu_backward", |x, g| if x > 0.0 { g } else { 0.0 })
}

fn map(input: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let values = input.values().iter().map(|&v| f(v)).collect();
    Tensor::new(input.shape().to_vec(), values).expect("same length")
}

fn zip(t: &Tensor, upstream: &[f64], op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    if t.len() != upstream.len() {
        return Err(TensorError::ShapeMismatch {
            op,
            detail: format!("{} values vs {} upstream", t.len(), upstream.len()),
        });
    }
    let values = t.values().iter().zip(upstream).map(|(&a, &g)| f(a, g)).collect();
    Tensor::new(t.shape().to_vec(), values)
}
