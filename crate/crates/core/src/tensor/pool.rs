use serde::{Deserialize, Serialize};

use super::{hwc, Result, Tensor, TensorError};

/// Max-pooling geometry.
///
/// With `ceil_mode` off the output is `floor((H − k)/s) + 1` and trailing cells
/// that do not fill a window are dropped. With `ceil_mode` on the output is
/// `ceil(H/s)` and the input is implicitly padded with −∞, split as evenly as
/// possible with the extra cell at the end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    #[serde(default)]
    pub ceil_mode: bool,
}

fn axis_len(n: usize, k: usize, s: usize, ceil_mode: bool) -> Option<(usize, usize)> {
    if k == 0 || s == 0 || n == 0 {
        return None;
    }
    if ceil_mode {
        let out = n.div_ceil(s);
        let total = ((out - 1) * s + k).saturating_sub(n);
        Some((out, total / 2))
    } else if n < k {
        None
    } else {
        Some(((n - k) / s + 1, 0))
    }
}

impl PoolSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_h == 0 || self.kernel_w == 0 || self.stride_h == 0 || self.stride_w == 0 {
            return Err(TensorError::InvalidSpec {
                op: "max_pool",
                detail: "kernel and stride must be positive".into(),
            });
        }
        Ok(())
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let (oh, _) = axis_len(h, self.kernel_h, self.stride_h, self.ceil_mode)?;
        let (ow, _) = axis_len(w, self.kernel_w, self.stride_w, self.ceil_mode)?;
        Some((oh, ow))
    }

    /// Leading implicit padding per axis.
    fn lead_pad(&self, h: usize, w: usize) -> (usize, usize) {
        let ph = axis_len(h, self.kernel_h, self.stride_h, self.ceil_mode).map_or(0, |v| v.1);
        let pw = axis_len(w, self.kernel_w, self.stride_w, self.ceil_mode).map_or(0, |v| v.1);
        (ph, pw)
    }
}

/// Per-window maximum; also returns, for each output cell, the flat input index
/// it was taken from (first index wins ties).
pub fn max_pool_forward(input: &Tensor, spec: &PoolSpec) -> Result<(Tensor, Vec<usize>)> {
    spec.validate()?;
    let [h, w, c] = hwc(input, "max_pool")?;
    let (oh, ow) = spec.output_hw(h, w).ok_or_else(|| TensorError::EmptyOutput {
        op: "max_pool",
        detail: format!("input {h}x{w}, kernel {}x{}", spec.kernel_h, spec.kernel_w),
    })?;
    let (ph, pw) = spec.lead_pad(h, w);
    let x = input.values();
    let mut out = vec![f64::NEG_INFINITY; oh * ow * c];
    let mut arg = vec![usize::MAX; oh * ow * c];
    for oy in 0..oh {
        let y0 = (oy * spec.stride_h) as isize - ph as isize;
        let ys = y0.max(0) as usize..((y0 + spec.kernel_h as isize).min(h as isize)) as usize;
        for ox in 0..ow {
            let x0 = (ox * spec.stride_w) as isize - pw as isize;
            let xs = x0.max(0) as usize..((x0 + spec.kernel_w as isize).min(w as isize)) as usize;
            let base = (oy * ow + ox) * c;
            for iy in ys.clone() {
                for ix in xs.clone() {
                    let src = (iy * w + ix) * c;
                    for ch in 0..c {
                        let v = x[src + ch];
                        if v > out[base + ch] || arg[base + ch] == usize::MAX {
                            out[base + ch] = v;
                            arg[base + ch] = src + ch;
                        }
                    }
                }
            }
        }
    }
    Ok((Tensor::new(vec![oh, ow, c], out)?, arg))
}

/// Routes each upstream gradient to the input cell recorded in `argmax`.
pub fn max_pool_backward(in_shape: &[usize], argmax: &[usize], upstream: &[f64]) -> Result<Tensor> {
    if argmax.len() != upstream.len() {
        return Err(TensorError::ShapeMismatch {
            op: "max_pool_backward",
            detail: format!("{} argmax entries, {} upstream values", argmax.len(), upstream.len()),
        });
    }
    let n: usize = in_shape.iter().product();
    let mut dx = vec![0.0; n];
    for (&i, &g) in argmax.iter().zip(upstream) {
        if i >= n {
            return Err(TensorError::ShapeMismatch {
                op: "max_pool_backward",
                detail: format!("argmax index {i} outside input of {n}"),
            });
        }
        dx[i] += g;
    }
    Tensor::new(in_shape.to_vec(), dx)
}
