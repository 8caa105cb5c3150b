use super::{Result, Tensor, TensorError};

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

fn check(input_len: usize, weights: &Tensor, bias: &Tensor) -> Result<(usize, usize)> {
    let (n, m) = match *weights.shape() {
        [n, m] => (n, m),
        _ => {
            return Err(TensorError::ShapeMismatch {
                op: "dense",
                detail: format!("weights must be [in, out], got {:?}", weights.shape()),
            })
        }
    };
    if n != input_len {
        return Err(TensorError::ShapeMismatch {
            op: "dense",
            detail: format!("input has {input_len} values, weights expect {n}"),
        });
    }
    if bias.shape() != [m] {
        return Err(TensorError::ShapeMismatch {
            op: "dense",
            detail: format!("bias {:?}, expected [{m}]", bias.shape()),
        });
    }
    Ok((n, m))
}

/// `y = xᵀW + b`; the input is flattened, weights are `[in, out]`.
pub fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (_, m) = check(input.len(), weights, bias)?;
    let mut y = bias.values().to_vec();
    for (x, row) in input.values().iter().zip(weights.values().chunks_exact(m)) {
        if *x == 0.0 {
            continue;
        }
        for (o, w) in y.iter_mut().zip(row) {
            *o += x * w;
        }
    }
    Ok(Tensor::from_vec(y))
}

pub fn dense_backward(input: &Tensor, weights: &Tensor, upstream: &[f64]) -> Result<DenseGrads> {
    let m = weights.shape().get(1).copied().unwrap_or(0);
    if upstream.len() != m || weights.len() != input.len() * m {
        return Err(TensorError::ShapeMismatch {
            op: "dense_backward",
            detail: format!("upstream {} for weights {:?}", upstream.len(), weights.shape()),
        });
    }
    let mut dx = Vec::with_capacity(input.len());
    let mut dw = Vec::with_capacity(weights.len());
    for (x, row) in input.values().iter().zip(weights.values().chunks_exact(m)) {
        dx.push(row.iter().zip(upstream).map(|(w, g)| w * g).sum());
        dw.extend(upstream.iter().map(|g| x * g));
    }
    Ok(DenseGrads {
        input: Tensor::new(input.shape().to_vec(), dx)?,
        weights: Tensor::new(weights.shape().to_vec(), dw)?,
        bias: Tensor::from_vec(upstream.to_vec()),
    })
}
