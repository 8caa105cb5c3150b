use serde::{Deserialize, Serialize};

use super::gemm::{gemm, MatRef};
use super::{hwc, Result, Tensor, TensorError};

/// 2-D convolution geometry. Weights are laid out `[kh, kw, C, filters]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filter_count: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    #[serde(default)]
    pub pad_h: usize,
    #[serde(default)]
    pub pad_w: usize,
}

impl ConvSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("filter_count", self.filter_count),
            ("kernel_h", self.kernel_h),
            ("kernel_w", self.kernel_w),
            ("stride_h", self.stride_h),
            ("stride_w", self.stride_w),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(TensorError::InvalidSpec {
                    op: "conv2d",
                    detail: format!("{name} must be positive"),
                });
            }
        }
        Ok(())
    }

    /// `floor((H + 2·pad − k) / stride) + 1` per axis; `None` when no kernel placement fits.
    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let ph = h + 2 * self.pad_h;
        let pw = w + 2 * self.pad_w;
        if ph < self.kernel_h || pw < self.kernel_w || self.stride_h == 0 || self.stride_w == 0 {
            return None;
        }
        Some(((ph - self.kernel_h) / self.stride_h + 1, (pw - self.kernel_w) / self.stride_w + 1))
    }

    pub fn weight_shape(&self, in_channels: usize) -> [usize; 4] {
        [self.kernel_h, self.kernel_w, in_channels, self.filter_count]
    }

    fn patch_len(&self, in_channels: usize) -> usize {
        self.kernel_h * self.kernel_w * in_channels
    }
}

/// Forward-pass state needed by [`conv2d_backward`]: the unrolled input patches.
#[derive(Debug, Clone)]
pub struct ConvCache {
    cols: Vec<f64>,
    in_shape: [usize; 3],
    out_hw: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    /// `None` when the caller did not ask for the input gradient.
    pub input: Option<Tensor>,
    pub weights: Tensor,
    pub bias: Tensor,
}

fn check_params(spec: &ConvSpec, in_shape: [usize; 3], weights: &Tensor, bias: &Tensor) -> Result<(usize, usize)> {
    spec.validate()?;
    let [h, w, c] = in_shape;
    let want = spec.weight_shape(c);
    if weights.shape() != want {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d",
            detail: format!("weights {:?}, expected {:?}", weights.shape(), want),
        });
    }
    if bias.shape() != [spec.filter_count] {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d",
            detail: format!("bias {:?}, expected [{}]", bias.shape(), spec.filter_count),
        });
    }
    spec.output_hw(h, w).ok_or_else(|| TensorError::EmptyOutput {
        op: "conv2d",
        detail: format!(
            "input {h}x{w} with pad {}x{} cannot hold a {}x{} kernel",
            spec.pad_h, spec.pad_w, spec.kernel_h, spec.kernel_w
        ),
    })
}

/// Unrolls every receptive field into one row of a `[oh·ow, kh·kw·C]` matrix.
fn im2col(input: &[f64], in_shape: [usize; 3], spec: &ConvSpec, out_hw: (usize, usize)) -> Vec<f64> {
    let [h, w, c] = in_shape;
    let (oh, ow) = out_hw;
    let k = spec.patch_len(c);
    let mut cols = vec![0.0; oh * ow * k];
    for oy in 0..oh {
        for ox in 0..ow {
            let row = &mut cols[(oy * ow + ox) * k..(oy * ow + ox + 1) * k];
            for ky in 0..spec.kernel_h {
                let iy = (oy * spec.stride_h + ky) as isize - spec.pad_h as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..spec.kernel_w {
                    let ix = (ox * spec.stride_w + kx) as isize - spec.pad_w as isize;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let src = (iy as usize * w + ix as usize) * c;
                    let dst = (ky * spec.kernel_w + kx) * c;
                    row[dst..dst + c].copy_from_slice(&input[src..src + c]);
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], in_shape: [usize; 3], spec: &ConvSpec, out_hw: (usize, usize)) -> Vec<f64> {
    let [h, w, c] = in_shape;
    let (oh, ow) = out_hw;
    let k = spec.patch_len(c);
    let mut out = vec![0.0; h * w * c];
    for oy in 0..oh {
        for ox in 0..ow {
            let row = &cols[(oy * ow + ox) * k..(oy * ow + ox + 1) * k];
            for ky in 0..spec.kernel_h {
                let iy = (oy * spec.stride_h + ky) as isize - spec.pad_h as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..spec.kernel_w {
                    let ix = (ox * spec.stride_w + kx) as isize - spec.pad_w as isize;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let dst = (iy as usize * w + ix as usize) * c;
                    let src = (ky * spec.kernel_w + kx) * c;
                    for (o, v) in out[dst..dst + c].iter_mut().zip(&row[src..src + c]) {
                        *o += v;
                    }
                }
            }
        }
    }
    out
}

/// Cross-correlation (no kernel flip) of an `[H, W, C]` input, zero padded.
pub fn conv2d_forward(input: &Tensor, spec: &ConvSpec, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    conv2d_forward_cached(input, spec, weights, bias).map(|(out, _)| out)
}

pub fn conv2d_forward_cached(
    input: &Tensor,
    spec: &ConvSpec,
    weights: &Tensor,
    bias: &Tensor,
) -> Result<(Tensor, ConvCache)> {
    let in_shape = hwc(input, "conv2d")?;
    let out_hw = check_params(spec, in_shape, weights, bias)?;
    let (oh, ow) = out_hw;
    let k = spec.patch_len(in_shape[2]);
    let f = spec.filter_count;
    let cols = im2col(input.values(), in_shape, spec, out_hw);
    let mut out = Vec::with_capacity(oh * ow * f);
    for _ in 0..oh * ow {
        out.extend_from_slice(bias.values());
    }
    gemm(
        &MatRef::row_major(&cols, oh * ow, k),
        &MatRef::row_major(weights.values(), k, f),
        1.0,
        &mut out,
    );
    let out = Tensor::new(vec![oh, ow, f], out)?;
    Ok((out, ConvCache { cols, in_shape, out_hw }))
}

/// Gradients of a convolution given the upstream gradient `[oh, ow, filters]`.
pub fn conv2d_backward(
    cache: &ConvCache,
    spec: &ConvSpec,
    weights: &Tensor,
    upstream: &[f64],
    need_input_grad: bool,
) -> Result<ConvGrads> {
    let (oh, ow) = cache.out_hw;
    let c = cache.in_shape[2];
    let k = spec.patch_len(c);
    let f = spec.filter_count;
    if upstream.len() != oh * ow * f {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d_backward",
            detail: format!("upstream has {} values, expected {}", upstream.len(), oh * ow * f),
        });
    }
    if weights.shape() != spec.weight_shape(c) {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d_backward",
            detail: format!("weights {:?}", weights.shape()),
        });
    }
    let mut dw = vec![0.0; k * f];
    gemm(
        &MatRef::transposed(&cache.cols, oh * ow, k),
        &MatRef::row_major(upstream, oh * ow, f),
        0.0,
        &mut dw,
    );
    let mut db = vec![0.0; f];
    for row in upstream.chunks_exact(f) {
        for (d, g) in db.iter_mut().zip(row) {
            *d += g;
        }
    }
    let input = if need_input_grad {
        let mut dcols = vec![0.0; oh * ow * k];
        gemm(
            &MatRef::row_major(upstream, oh * ow, f),
            &MatRef::transposed(weights.values(), k, f),
            0.0,
            &mut dcols,
        );
        let dx = col2im(&dcols, cache.in_shape, spec, cache.out_hw);
        Some(Tensor::new(cache.in_shape.to_vec(), dx)?)
    } else {
        None
    };
    Ok(ConvGrads {
        input,
        weights: Tensor::new(weights.shape().to_vec(), dw)?,
        bias: Tensor::from_vec(db),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(f: usize, k: usize, s: usize, p: usize) -> ConvSpec {
        ConvSpec {
            filter_count: f,
            kernel_h: k,
            kernel_w: k,
            stride_h: s,
            stride_w: s,
            pad_h: p,
            pad_w: p,
        }
    }

    #[test]
    fn table_first_row_shape() {
        let s = spec(64, 5, 5, 0);
        assert_eq!(s.output_hw(925, 1475), Some((185, 295)));
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let input = Tensor::new(vec![3, 4, 1], (0..12).map(|v| v as f64 - 5.5).collect()).unwrap();
        let w = Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap();
        let b = Tensor::zeros(&[1]);
        let out = conv2d_forward(&input, &spec(1, 1, 1, 0), &w, &b).unwrap();
        assert_eq!(out.values(), input.values());
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let input = Tensor::new(vec![4, 4, 2], (0..32).map(|v| (v as f64).sin()).collect()).unwrap();
        let s = spec(3, 3, 1, 1);
        let w = Tensor::new(vec![3, 3, 2, 3], (0..54).map(|v| (v as f64 * 0.3).cos()).collect()).unwrap();
        let b = Tensor::zeros(&[3]);
        let (out, cache) = conv2d_forward_cached(&input, &s, &w, &b).unwrap();
        let g = conv2d_backward(&cache, &s, &w, &vec![0.0; out.len()], true).unwrap();
        assert!(g.weights.values().iter().all(|v| *v == 0.0));
        assert!(g.bias.values().iter().all(|v| *v == 0.0));
        assert!(g.input.unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_output_weight_grad_is_patch() {
        // 3x3x1 input, 3x3 kernel, valid: one output cell.
        let input = Tensor::new(vec![3, 3, 1], (1..=9).map(|v| v as f64).collect()).unwrap();
        let s = spec(1, 3, 1, 0);
        let w = Tensor::new(vec![3, 3, 1, 1], vec![0.1; 9]).unwrap();
        let b = Tensor::zeros(&[1]);
        let (out, cache) = conv2d_forward_cached(&input, &s, &w, &b).unwrap();
        assert_eq!(out.shape(), &[1, 1, 1]);
        let g = conv2d_backward(&cache, &s, &w, &[2.5], false).unwrap();
        let want: Vec<f64> = (1..=9).map(|v| v as f64 * 2.5).collect();
        assert_eq!(g.weights.values(), want.as_slice());
        assert_eq!(g.bias.values(), &[2.5]);
        assert!(g.input.is_none());
    }

    #[test]
    fn rejects_bad_shapes() {
        let input = Tensor::zeros(&[4, 4, 2]);
        let s = spec(2, 3, 1, 0);
        let b = Tensor::zeros(&[2]);
        let bad_w = Tensor::zeros(&[3, 3, 1, 2]);
        assert!(matches!(
            conv2d_forward(&input, &s, &bad_w, &b),
            Err(TensorError::ShapeMismatch { .. })
        ));
        let big = spec(2, 5, 1, 0);
        let w = Tensor::zeros(&[5, 5, 2, 2]);
        assert!(matches!(
            conv2d_forward(&input, &big, &w, &b),
            Err(TensorError::EmptyOutput { .. })
        ));
    }
}
