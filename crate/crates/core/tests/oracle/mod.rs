//! Brute-force reference implementations shared by the integration and acceptance tests.
//! Each one follows the textbook definition directly and shares no code with the library.
#![allow(dead_code)]

/// Direct 7-loop convolution over `[H, W, C]` input and `[kh, kw, C, F]` weights with zero padding.
#[allow(clippy::too_many_arguments)]
pub fn conv2d(
    x: &[f64],
    (h, w, c): (usize, usize, usize),
    k: &[f64],
    (kh, kw, f): (usize, usize, usize),
    bias: &[f64],
    (sh, sw): (usize, usize),
    (ph, pw): (usize, usize),
) -> (usize, usize, Vec<f64>) {
    let oh = (h + 2 * ph - kh) / sh + 1;
    let ow = (w + 2 * pw - kw) / sw + 1;
    let mut out = vec![0.0; oh * ow * f];
    for oy in 0..oh {
        for ox in 0..ow {
            for o in 0..f {
                let mut acc = bias[o];
                for dy in 0..kh {
                    for dx in 0..kw {
                        let iy = (oy * sh + dy) as isize - ph as isize;
                        let ix = (ox * sw + dx) as isize - pw as isize;
                        if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                            continue;
                        }
                        for ch in 0..c {
                            acc += x[(iy as usize * w + ix as usize) * c + ch] * k[((dy * kw + dx) * c + ch) * f + o];
                        }
                    }
                }
                out[(oy * ow + ox) * f + o] = acc;
            }
        }
    }
    (oh, ow, out)
}

/// Per-window maximum. Ceil mode: `ceil(n/s)` outputs, windows placed after
/// `floor(total_pad/2)` virtual cells and clipped to the input.
pub fn max_pool(
    x: &[f64],
    (h, w, c): (usize, usize, usize),
    (kh, kw): (usize, usize),
    (sh, sw): (usize, usize),
    ceil: bool,
) -> (usize, usize, Vec<f64>) {
    let geom = |n: usize, k: usize, s: usize| -> (usize, isize) {
        if ceil {
            let out = n.div_ceil(s);
            let need = (out - 1) * s + k;
            (out, (need.saturating_sub(n) / 2) as isize)
        } else {
            ((n - k) / s + 1, 0)
        }
    };
    let (oh, lead_h) = geom(h, kh, sh);
    let (ow, lead_w) = geom(w, kw, sw);
    let mut out = vec![f64::NEG_INFINITY; oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                for dy in 0..kh {
                    for dx in 0..kw {
                        let iy = (oy * sh + dy) as isize - lead_h;
                        let ix = (ox * sw + dx) as isize - lead_w;
                        if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                            let v = x[(iy as usize * w + ix as usize) * c + ch];
                            let slot = &mut out[(oy * ow + ox) * c + ch];
                            if v > *slot {
                                *slot = v;
                            }
                        }
                    }
                }
            }
        }
    }
    (oh, ow, out)
}

/// Neighbourhood mean with explicit edge replication: every one of the `t·f`
/// window cells is visited and its coordinates clamped into the grid.
pub fn mean_filter(g: &[f64], rows: usize, cols: usize, t: usize, f: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let mut s = 0.0;
            for i in 0..t {
                for j in 0..f {
                    let rr = (r as isize + i as isize - (t / 2) as isize).clamp(0, rows as isize - 1) as usize;
                    let cc = (c as isize + j as isize - (f / 2) as isize).clamp(0, cols as isize - 1) as usize;
                    s += g[rr * cols + cc];
                }
            }
            out[r * cols + c] = s / (t * f) as f64;
        }
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean-ratio truth and indeterminacy.
pub fn proposed(g: &[f64], rows: usize, cols: usize, t: usize, f: usize) -> (Vec<f64>, Vec<f64>) {
    let gb = mean_filter(g, rows, cols, t, f);
    let d: Vec<f64> = g.iter().zip(&gb).map(|(a, b)| (a - b).abs()).collect();
    let (mg, md) = (mean(&gb), mean(&d));
    (gb.iter().map(|v| v / mg).collect(), d.iter().map(|v| v / md).collect())
}

/// Min-max truth, indeterminacy and falsity.
pub fn baseline(g: &[f64], rows: usize, cols: usize, t: usize, f: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let gb = mean_filter(g, rows, cols, t, f);
    let d: Vec<f64> = g.iter().zip(&gb).map(|(a, b)| (a - b).abs()).collect();
    let scale = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        v.iter().map(|x| (x - lo) / (hi - lo)).collect::<Vec<f64>>()
    };
    let t_ = scale(&gb);
    let f_ = t_.iter().map(|v| 1.0 - v).collect();
    (t_, scale(&d), f_)
}

/// Compensated (Kahan) sum.
pub fn kahan_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let y = x - comp;
        let t = s + y;
        comp = (t - s) - y;
        s = t;
    }
    s
}

/// Fused posterior by rule name, normalised with compensated summation in the log domain.
pub fn fuse(pa: &[f64], pb: &[f64], rule: &str) -> Vec<f64> {
    match rule {
        "product" => {
            let logs: Vec<f64> = pa
                .iter()
                .zip(pb)
                .map(|(a, b)| a.ln().max(-745.0) + b.ln().max(-745.0))
                .collect();
            let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z = kahan_sum(logs.iter().map(|l| (l - m).exp()));
            logs.iter().map(|l| (l - m).exp() / z).collect()
        }
        "sum" => pa.iter().zip(pb).map(|(a, b)| (a + b) / 2.0).collect(),
        "maximum" => {
            let m: Vec<f64> = pa.iter().zip(pb).map(|(a, b)| a.max(*b)).collect();
            let z = kahan_sum(m.iter().cloned());
            m.iter().map(|v| v / z).collect()
        }
        other => panic!("unknown rule {other}"),
    }
}

/// `10·log10(Σs² / Σn²)`.
pub fn snr_db(signal: &[f64], noise: &[f64]) -> f64 {
    let ps = kahan_sum(signal.iter().map(|v| v * v));
    let pn = kahan_sum(noise.iter().map(|v| v * v));
    10.0 * (ps / pn).log10()
}

/// Power in `[lo, hi)` Hz from an averaged periodogram (rectangular segments of `seg` samples).
pub fn band_power(x: &[f64], fs: f64, seg: usize, lo: f64, hi: f64) -> f64 {
    use rustfft::{num_complex::Complex, FftPlanner};
    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg);
    let mut total = 0.0;
    for chunk in x.chunks_exact(seg) {
        let mut buf: Vec<Complex<f64>> = chunk.iter().map(|v| Complex::new(*v, 0.0)).collect();
        fft.process(&mut buf);
        for (k, z) in buf.iter().enumerate().take(seg / 2 + 1) {
            let freq = k as f64 * fs / seg as f64;
            if freq >= lo && freq < hi {
                total += z.norm_sqr();
            }
        }
    }
    total
}

/// Central differences of a scalar function of several flat inputs.
pub fn central_difference(inputs: &[Vec<f64>], step: f64, f: impl Fn(&[Vec<f64>]) -> f64) -> Vec<Vec<f64>> {
    let mut xs = inputs.to_vec();
    let mut out = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        let mut g = vec![0.0; xs[i].len()];
        for j in 0..xs[i].len() {
            let orig = xs[i][j];
            xs[i][j] = orig + step;
            let up = f(&xs);
            xs[i][j] = orig - step;
            let down = f(&xs);
            xs[i][j] = orig;
            g[j] = (up - down) / (2.0 * step);
        }
        out.push(g);
    }
    out
}

/// Largest `|a − n| / max(|a|, |n|, 1e-6)` over all entries.
pub fn max_rel_error(analytic: &[Vec<f64>], numeric: &[Vec<f64>]) -> f64 {
    analytic
        .iter()
        .flatten()
        .zip(numeric.iter().flatten())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}
