use super::{Result, TensorError};

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Returns `(−ln p[label], p)`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if logits.len() < 2 {
        return Err(TensorError::ShapeMismatch {
            op: "softmax_cross_entropy",
            detail: format!("need at least 2 classes, got {}", logits.len()),
        });
    }
    if label >= logits.len() {
        return Err(TensorError::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
    let log_norm = max + sum.ln();
    let loss = log_norm - logits[label];
    let probs = logits.iter().map(|z| (z - log_norm).exp()).collect();
    if !loss.is_finite() {
        return Err(TensorError::NonFinite {
            op: "softmax_cross_entropy",
        });
    }
    Ok((loss, probs))
}

/// `upstream · (p − one_hot(label))`.
pub fn softmax_cross_entropy_backward(probs: &[f64], label: usize, upstream: f64) -> Vec<f64> {
    probs
        .iter()
        .enumerate()
        .map(|(i, p)| upstream * (p - if i == label { 1.0 } else { 0.0 }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits() {
        let (loss, p) = softmax_cross_entropy(&[0.3; 11], 4).unwrap();
        assert!((loss - 11f64.ln()).abs() < 1e-12);
        for v in p {
            assert!((v - 1.0 / 11.0).abs() < 1e-15);
        }
    }

    #[test]
    fn shift_invariance() {
        let z = [0.1, -2.0, 3.5, 0.7];
        let shifted: Vec<f64> = z.iter().map(|v| v + 123.0).collect();
        let a = softmax(&z);
        let b = softmax(&shifted);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn label_out_of_range() {
        assert_eq!(
            softmax_cross_entropy(&[0.0, 1.0], 2).unwrap_err(),
            TensorError::LabelOutOfRange { label: 2, classes: 2 }
        );
    }

    #[test]
    fn large_logits_stay_finite() {
        let (loss, p) = softmax_cross_entropy(&[1000.0, 0.0, -1000.0], 0).unwrap();
        assert!(loss.abs() < 1e-12);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
