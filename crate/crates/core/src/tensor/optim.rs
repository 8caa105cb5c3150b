use super::{Result, Tensor, TensorError};

/// Plain SGD: `p ← p − lr·grad(p)`, then zeroes every gradient.
///
/// All gradients are checked before any parameter is touched.
pub fn sgd_step(params: &mut [&mut Tensor], lr: f64) -> Result<()> {
    if let Some(index) = params.iter().position(|p| p.grad().is_none()) {
        return Err(TensorError::MissingGradient { index });
    }
    for p in params.iter_mut() {
        let (grad, values) = p.grad_and_values_mut();
        let grad = grad.expect("checked above");
        for (v, g) in values.iter_mut().zip(grad.iter_mut()) {
            *v -= lr * *g;
            *g = 0.0;
        }
    }
    Ok(())
}
