//! Seeded random test batteries shared by the integration tests and the acceptance suite.
//! Each battery returns the worst deviation it observed so callers can assert or report.
#![allow(dead_code)]

use ncnn::grid::Grid;
use ncnn::model::{argmax, combine, CombinationRule};
use ncnn::neutrosophic::{baseline_transform_grid, mean_filter, proposed_transform_grid, NsWindow};
use ncnn::signal::{mix_noise, AudioClip};
use ncnn::tensor::{conv2d_forward, ConvSpec, PoolSpec, Result as TResult, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::oracle;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * Distribution::<f64>::sample(&StandardNormal, rng)).collect::<Vec<f64>>()
}

/// Analytic tape gradients versus oracle central differences for a scalar graph.
fn graph_error(inputs: &[(Vec<usize>, Vec<f64>)], build: impl Fn(&mut Tape<'_>, &[Var]) -> TResult<Var>) -> f64 {
    let mut tape = Tape::new();
    let leaves: Vec<Var> = inputs
        .iter()
        .map(|(s, v)| tape.leaf(Tensor::new(s.clone(), v.clone()).unwrap(), true))
        .collect();
    let out = build(&mut tape, &leaves).unwrap();
    let grads = tape.backward(out).unwrap();
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .zip(inputs)
        .map(|(l, (_, v))| grads.get(*l).map_or(vec![0.0; v.len()], <[f64]>::to_vec))
        .collect();
    let flat: Vec<Vec<f64>> = inputs.iter().map(|(_, v)| v.clone()).collect();
    let numeric = oracle::central_difference(&flat, 1e-5, |xs| {
        let mut tape = Tape::inference();
        let leaves: Vec<Var> = xs
            .iter()
            .zip(inputs)
            .map(|(v, (s, _))| tape.leaf(Tensor::new(s.clone(), v.clone()).unwrap(), false))
            .collect();
        let out = build(&mut tape, &leaves).unwrap();
        tape.value(out).values()[0]
    });
    oracle::max_rel_error(&analytic, &numeric)
}

fn projected(tape: &mut Tape<'_>, v: Var, seed: u64) -> TResult<Var> {
    let n = tape.value(v).len();
    let coeffs = normals(&mut rng(seed), n, 1.0);
    tape.project(v, coeffs)
}

/// Worst relative gradient error per operation over `cases` random instances each.
pub fn gradient_errors(cases: usize, seed: u64) -> Vec<(&'static str, f64)> {
    let mut r = rng(seed);
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for k in 0..cases {
        let (h, w, c) = (r.random_range(3..7), r.random_range(3..7), r.random_range(1..4));
        let spec = ConvSpec {
            filter_count: r.random_range(1..4),
            kernel_h: r.random_range(1..4),
            kernel_w: r.random_range(1..4),
            stride_h: r.random_range(1..3),
            stride_w: r.random_range(1..3),
            pad_h: r.random_range(0..2),
            pad_w: r.random_range(0..2),
        };
        let ws = spec.weight_shape(c).to_vec();
        let inputs = vec![
            (vec![h, w, c], normals(&mut r, h * w * c, 1.0)),
            (ws.clone(), normals(&mut r, ws.iter().product(), 0.5)),
            (vec![spec.filter_count], normals(&mut r, spec.filter_count, 0.1)),
        ];
        worst = worst.max(graph_error(&inputs, |t, v| {
            let y = t.conv2d(v[0], v[1], v[2], spec)?;
            projected(t, y, k as u64)
        }));
    }
    out.push(("conv2d", worst));

    let mut worst = 0.0f64;
    for k in 0..cases {
        let (h, w, c) = (r.random_range(4..9), r.random_range(4..9), r.random_range(1..3));
        let spec = PoolSpec {
            kernel_h: r.random_range(2..4),
            kernel_w: r.random_range(2..4),
            stride_h: r.random_range(1..3),
            stride_w: r.random_range(1..3),
            ceil_mode: r.random_bool(0.5),
        };
        let inputs = vec![(vec![h, w, c], normals(&mut r, h * w * c, 1.0))];
        worst = worst.max(graph_error(&inputs, |t, v| {
            let y = t.max_pool(v[0], spec)?;
            projected(t, y, k as u64)
        }));
    }
    out.push(("max_pool", worst));

    let mut worst = 0.0f64;
    for k in 0..cases {
        let (n, m) = (r.random_range(1..12), r.random_range(1..8));
        let inputs = vec![
            (vec![n], normals(&mut r, n, 1.0)),
            (vec![n, m], normals(&mut r, n * m, 0.5)),
            (vec![m], normals(&mut r, m, 0.1)),
        ];
        worst = worst.max(graph_error(&inputs, |t, v| {
            let y = t.dense(v[0], v[1], v[2])?;
            projected(t, y, k as u64)
        }));
    }
    out.push(("dense", worst));

    for (name, relu) in [("tanh", false), ("relu", true)] {
        let mut worst = 0.0f64;
        for k in 0..cases {
            let inputs = vec![(vec![3, 4, 2], normals(&mut r, 24, 1.5))];
            worst = worst.max(graph_error(&inputs, |t, v| {
                let y = if relu { t.relu(v[0]) } else { t.tanh(v[0]) };
                projected(t, y, k as u64)
            }));
        }
        out.push((name, worst));
    }

    let mut worst = 0.0f64;
    for _ in 0..cases {
        let label = r.random_range(0..11);
        let inputs = vec![(vec![11], normals(&mut r, 11, 2.0))];
        worst = worst.max(graph_error(&inputs, |t, v| t.softmax_cross_entropy(v[0], label)));
    }
    out.push(("softmax_cross_entropy", worst));

    let mut worst = 0.0f64;
    for _ in 0..cases {
        let label = r.random_range(0..4);
        let c1 = ConvSpec {
            filter_count: 2,
            kernel_h: 3,
            kernel_w: 3,
            stride_h: 1,
            stride_w: 1,
            pad_h: 1,
            pad_w: 1,
        };
        let c2 = ConvSpec { filter_count: 3, ..c1 };
        let pool = PoolSpec {
            kernel_h: 2,
            kernel_w: 2,
            stride_h: 2,
            stride_w: 2,
            ceil_mode: true,
        };
        let inputs = vec![
            (vec![7, 7, 1], normals(&mut r, 49, 1.0)),
            (vec![3, 3, 1, 2], normals(&mut r, 18, 0.5)),
            (vec![2], normals(&mut r, 2, 0.1)),
            (vec![3, 3, 2, 3], normals(&mut r, 54, 0.4)),
            (vec![3], normals(&mut r, 3, 0.1)),
            (vec![48, 4], normals(&mut r, 192, 0.3)),
            (vec![4], normals(&mut r, 4, 0.1)),
        ];
        worst = worst.max(graph_error(&inputs, |t, v| {
            let a = t.conv2d(v[0], v[1], v[2], c1)?;
            let a = t.tanh(a);
            let a = t.max_pool(a, pool)?;
            let a = t.conv2d(a, v[3], v[4], c2)?;
            let a = t.relu(a);
            let z = t.dense(a, v[5], v[6])?;
            t.softmax_cross_entropy(z, label)
        }));
    }
    out.push(("two-conv network", worst));
    out
}

/// Worst absolute difference of the library conv2d against the direct oracle.
pub fn conv_oracle_error(cases: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let (h, w, c) = (r.random_range(1..13), r.random_range(1..13), r.random_range(1..5));
        let spec = ConvSpec {
            filter_count: r.random_range(1..5),
            kernel_h: r.random_range(1..=h.min(5)),
            kernel_w: r.random_range(1..=w.min(5)),
            stride_h: r.random_range(1..4),
            stride_w: r.random_range(1..4),
            pad_h: r.random_range(0..3),
            pad_w: r.random_range(0..3),
        };
        let x = normals(&mut r, h * w * c, 1.0);
        let k = normals(&mut r, spec.kernel_h * spec.kernel_w * c * spec.filter_count, 1.0);
        let b = normals(&mut r, spec.filter_count, 1.0);
        let got = conv2d_forward(
            &Tensor::new(vec![h, w, c], x.clone()).unwrap(),
            &spec,
            &Tensor::new(spec.weight_shape(c).to_vec(), k.clone()).unwrap(),
            &Tensor::new(vec![spec.filter_count], b.clone()).unwrap(),
        )
        .unwrap();
        let (oh, ow, want) = oracle::conv2d(
            &x,
            (h, w, c),
            &k,
            (spec.kernel_h, spec.kernel_w, spec.filter_count),
            &b,
            (spec.stride_h, spec.stride_w),
            (spec.pad_h, spec.pad_w),
        );
        assert_eq!(got.shape(), &[oh, ow, spec.filter_count]);
        for (a, b) in got.values().iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

pub fn random_window(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> NsWindow {
    let odd = |r: &mut ChaCha8Rng, n: usize| 2 * r.random_range(0..=(n - 1) / 2) + 1;
    NsWindow::new(odd(r, rows), odd(r, cols)).unwrap()
}

/// Positive random grid with spectrogram-like structure (a smooth ridge plus noise).
pub fn random_grid(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Grid {
    let ridge = r.random_range(0..cols) as f64;
    let noise = normals(r, rows * cols, 0.5);
    Grid::from_fn(rows, cols, |i, j| 1.0 + 4.0 * (-((j as f64 - ridge).powi(2)) / 8.0).exp() + noise[i * cols + j].abs())
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Worst absolute difference of `mean_filter` against the oracle.
pub fn mean_filter_oracle_error(cases: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let (rows, cols) = (r.random_range(1..13), r.random_range(1..13));
        let g = Grid::new(rows, cols, normals(&mut r, rows * cols, 3.0)).unwrap();
        let w = random_window(&mut r, rows, cols);
        let got = mean_filter(&g, w).unwrap();
        worst = worst.max(max_abs(got.data(), &oracle::mean_filter(g.data(), rows, cols, w.t(), w.f())));
    }
    worst
}

/// Worst absolute difference of both transforms (every component) against the composed oracle.
pub fn ns_oracle_error(cases: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let (rows, cols) = (r.random_range(3..13), r.random_range(3..13));
        let g = random_grid(&mut r, rows, cols);
        let w = random_window(&mut r, rows, cols);
        let p = proposed_transform_grid(&g, w).unwrap();
        let (t, i) = oracle::proposed(g.data(), rows, cols, w.t(), w.f());
        worst = worst.max(max_abs(p.truth.data(), &t)).max(max_abs(p.indeterminacy.data(), &i));
        let b = baseline_transform_grid(&g, w).unwrap();
        let (t, i, f) = oracle::baseline(g.data(), rows, cols, w.t(), w.f());
        worst = worst
            .max(max_abs(b.truth.data(), &t))
            .max(max_abs(b.indeterminacy.data(), &i))
            .max(max_abs(b.falsity.as_ref().unwrap().data(), &f));
    }
    worst
}

/// Worst observed deviations of the transform invariants.
#[derive(Debug, Default)]
pub struct NsInvariants {
    pub mean_truth: f64,
    pub mean_indeterminacy: f64,
    /// Relative.
    pub scale: f64,
    pub offset: f64,
    /// Largest excursion of baseline memberships outside [0, 1].
    pub baseline_range: f64,
    pub falsity: f64,
}

pub fn ns_invariants(cases: usize, seed: u64) -> NsInvariants {
    let mut r = rng(seed);
    let mut out = NsInvariants::default();
    for _ in 0..cases {
        let (rows, cols) = (r.random_range(4..24), r.random_range(4..24));
        let g = random_grid(&mut r, rows, cols);
        let mut w = random_window(&mut r, rows, cols);
        // A 1x1 window makes the deviation identically zero.
        while w.t() * w.f() == 1 {
            w = random_window(&mut r, rows, cols);
        }
        let p = proposed_transform_grid(&g, w).unwrap();
        assert!(!p.is_degenerate());
        out.mean_truth = out.mean_truth.max((p.truth.mean() - 1.0).abs());
        out.mean_indeterminacy = out.mean_indeterminacy.max((p.indeterminacy.mean() - 1.0).abs());
        let a = r.random_range(0.01..100.0);
        let scaled = proposed_transform_grid(&g.map(|v| a * v), w).unwrap();
        for (x, y) in p
            .truth
            .data()
            .iter()
            .chain(p.indeterminacy.data())
            .zip(scaled.truth.data().iter().chain(scaled.indeterminacy.data()))
        {
            out.scale = out.scale.max((x - y).abs() / x.abs().max(1e-12));
        }
        let c = r.random_range(-50.0..50.0);
        let shifted = proposed_transform_grid(&g.map(|v| v + c), w).unwrap();
        out.offset = out.offset.max(max_abs(p.indeterminacy.data(), shifted.indeterminacy.data()));
        let b = baseline_transform_grid(&g, w).unwrap();
        let f = b.falsity.as_ref().unwrap();
        for v in b.truth.data().iter().chain(b.indeterminacy.data()).chain(f.data()) {
            out.baseline_range = out.baseline_range.max(-v).max(v - 1.0);
        }
        for (t, fv) in b.truth.data().iter().zip(f.data()) {
            out.falsity = out.falsity.max((fv - (1.0 - t)).abs());
        }
    }
    out
}

pub const TEST_SNRS: [f64; 6] = [-5.0, 0.0, 5.0, 10.0, 15.0, 20.0];

/// Worst `|measured − requested|` SNR in dB, measuring the added noise as output − clean.
pub fn snr_mixer_error(pairs: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let n = r.random_range(2000..6000);
        let f0 = r.random_range(100.0..900.0);
        let clean: Vec<f64> = (0..n)
            .map(|i| 0.05 * (i as f64 * f0 * std::f64::consts::TAU / 8000.0).sin())
            .zip(normals(&mut r, n, 0.01))
            .map(|(a, b)| a + b)
            .collect();
        let level = r.random_range(0.01..0.5);
        let noise = normals(&mut r, n + 3000, level);
        let clean = AudioClip::new(clean, 8000).unwrap();
        let noise = AudioClip::new(noise.iter().map(|v| v.clamp(-1.0, 1.0)).collect(), 8000).unwrap();
        let offset = r.random_range(0..3000);
        for snr in TEST_SNRS {
            let m = mix_noise(&clean, &noise, snr, offset).unwrap();
            assert_eq!(m.clipped, 0);
            let added: Vec<f64> = m.clip.samples().iter().zip(clean.samples()).map(|(y, c)| y - c).collect();
            worst = worst.max((oracle::snr_db(clean.samples(), &added) - snr).abs());
        }
    }
    worst
}

pub fn random_posterior(r: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let spread = r.random_range(0.1..8.0);
    let logits = normals(r, k, spread);
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Worst observed deviations of the fusion properties, and counts of argmax violations.
#[derive(Debug, Default)]
pub struct FusionStats {
    pub pairs: usize,
    pub sum_to_one: f64,
    pub negative: usize,
    pub commutativity: f64,
    pub oracle: f64,
    pub uniform_identity: f64,
    pub shared_argmax_violations: usize,
    pub rescale_argmax_violations: usize,
}

pub fn fusion_properties(pairs: usize, seed: u64) -> FusionStats {
    let mut r = rng(seed);
    let mut s = FusionStats {
        pairs,
        ..Default::default()
    };
    for _ in 0..pairs {
        let k = r.random_range(2..12);
        let pa = random_posterior(&mut r, k);
        let mut pb = random_posterior(&mut r, k);
        if r.random_bool(0.3) {
            // Force a shared argmax.
            let (ia, ib) = (argmax(&pa), argmax(&pb));
            pb.swap(ia, ib);
        }
        for rule in CombinationRule::ALL {
            let ab = combine(&pa, &pb, rule).unwrap();
            let ba = combine(&pb, &pa, rule).unwrap();
            s.sum_to_one = s.sum_to_one.max((ab.iter().sum::<f64>() - 1.0).abs());
            s.negative += ab.iter().filter(|v| **v < 0.0).count();
            s.commutativity = s.commutativity.max(max_abs(&ab, &ba));
            s.oracle = s.oracle.max(max_abs(&ab, &oracle::fuse(&pa, &pb, rule.name())));
            if argmax(&pa) == argmax(&pb) && argmax(&ab) != argmax(&pa) {
                s.shared_argmax_violations += 1;
            }
        }
        let uniform = vec![1.0 / k as f64; k];
        let id = combine(&pa, &uniform, CombinationRule::Product).unwrap();
        s.uniform_identity = s.uniform_identity.max(max_abs(&id, &pa));
        let scale = r.random_range(0.1..10.0);
        let raw: Vec<f64> = pb.iter().map(|v| v * scale).collect();
        let total: f64 = raw.iter().sum();
        let rescaled: Vec<f64> = raw.iter().map(|v| v / total).collect();
        if argmax(&combine(&pa, &rescaled, CombinationRule::Product).unwrap())
            != argmax(&combine(&pa, &pb, CombinationRule::Product).unwrap())
        {
            s.rescale_argmax_violations += 1;
        }
    }
    s
}
