//! Reference implementations used as test oracles. Deliberately naive:
//! plain index loops over nested `Vec`s, no shared code with the library.

#![allow(dead_code)]

use ascnet::cnn7::{build_cnn7, decomposed_conv_forward, DecomposedConvSpec, Variant};
use ascnet::nn::{ConvBank, LayerKind, LayerSpec, Mode, Network, Param, Tensor};
use ascnet::train::{add_l2_gradient, cross_entropy_loss, kl_mixup_loss};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `x[n][h][w][c]`.
pub type Img = Vec<Vec<Vec<Vec<f64>>>>;

pub fn random_img(rng: &mut impl Rng, n: usize, h: usize, w: usize, c: usize) -> Img {
    (0..n)
        .map(|_| {
            (0..h)
                .map(|_| (0..w).map(|_| (0..c).map(|_| rng.random_range(-1.0..1.0)).collect()).collect())
                .collect()
        })
        .collect()
}

pub fn flatten(x: &Img) -> Vec<f64> {
    x.iter().flatten().flatten().flatten().copied().collect()
}

/// Same-padded, stride-1 convolution with weights `w[kh][kw][cin][cout]`.
/// Six nested loops over output position, output channel and kernel window.
pub fn naive_conv(x: &Img, w: &[Vec<Vec<Vec<f64>>>], bias: &[f64]) -> Img {
    let (n, h, wd) = (x.len(), x[0].len(), x[0][0].len());
    let (kh, kw) = (w.len(), w[0].len());
    let cin = w[0][0].len();
    let cout = bias.len();
    let mut y = vec![vec![vec![vec![0.0; cout]; wd]; h]; n];
    for s in 0..n {
        for i in 0..h {
            for j in 0..wd {
                for o in 0..cout {
                    let mut acc = bias[o];
                    for a in 0..kh {
                        for b in 0..kw {
                            let ii = i as isize + a as isize - (kh / 2) as isize;
                            let jj = j as isize + b as isize - (kw / 2) as isize;
                            if ii < 0 || jj < 0 || ii >= h as isize || jj >= wd as isize {
                                continue;
                            }
                            for ci in 0..cin {
                                acc += x[s][ii as usize][jj as usize][ci] * w[a][b][ci][o];
                            }
                        }
                    }
                    y[s][i][j][o] = acc;
                }
            }
        }
    }
    y
}

/// Unflattens `[kh·kw·cin·cout]` weights.
pub fn kernel_from_flat(flat: &[f64], kh: usize, kw: usize, cin: usize, cout: usize) -> Vec<Vec<Vec<Vec<f64>>>> {
    let mut k = vec![vec![vec![vec![0.0; cout]; cin]; kw]; kh];
    let mut it = flat.iter();
    for a in k.iter_mut() {
        for b in a.iter_mut() {
            for c in b.iter_mut() {
                for o in c.iter_mut() {
                    *o = *it.next().expect("enough weights");
                }
            }
        }
    }
    k
}

pub fn channel_slice(x: &Img, lo: usize, hi: usize) -> Img {
    x.iter()
        .map(|s| s.iter().map(|r| r.iter().map(|px| px[lo..hi].to_vec()).collect()).collect())
        .collect()
}

/// Decomposed convolution written from its description: a 3×3 path over the
/// first quarter of the inputs, two 1×1 paths over each input half, and a
/// 1×1 path over all inputs, each producing a quarter of the outputs,
/// concatenated in that order.
pub fn naive_decomposed(x: &Img, cout: usize, paths: &[(Vec<f64>, Vec<f64>)]) -> Img {
    let cin = x[0][0][0].len();
    let q = cout / 4;
    let inputs = [(0, cin / 4, 3), (0, cin / 2, 1), (cin / 2, cin, 1), (0, cin, 1)];
    let parts: Vec<Img> = inputs
        .iter()
        .zip(paths)
        .map(|(&(lo, hi, k), (w, b))| {
            naive_conv(&channel_slice(x, lo, hi), &kernel_from_flat(w, k, k, hi - lo, q), b)
        })
        .collect();
    let mut y = parts[0].clone();
    for s in 0..y.len() {
        for i in 0..y[s].len() {
            for j in 0..y[s][i].len() {
                y[s][i][j] = parts.iter().flat_map(|p| p[s][i][j].iter().copied()).collect();
            }
        }
    }
    y
}

/// Largest elementwise relative error, with `floor` guarding tiny magnitudes.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`.
pub fn norm_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central differences of `f` at `x` along each coordinate in `coords`.
pub fn central_diff(x: &mut [f64], coords: &[usize], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    coords
        .iter()
        .map(|&i| {
            let orig = x[i];
            x[i] = orig + step;
            let up = f(x);
            x[i] = orig - step;
            let down = f(x);
            x[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

pub fn tensor(x: &Img) -> Tensor<f64> {
    let shape = [x.len(), x[0].len(), x[0][0].len(), x[0][0][0].len()];
    Tensor::from_vec(&shape, flatten(x)).unwrap()
}

/// Runs `count` random standard convolutions against [`naive_conv`];
/// returns the relative error of each case.
pub fn standard_conv_cases(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|case| {
            let n = rng.random_range(1..=2);
            let (h, w) = (rng.random_range(1..=7), rng.random_range(1..=7));
            let (cin, cout) = (rng.random_range(1..=5), rng.random_range(1..=5));
            let k = [[1, 1], [3, 3], [1, 3], [3, 1], [5, 5]][case % 5];
            let x = random_img(&mut rng, n, h, w, cin);
            let mut conv = ConvBank::<f64>::standard("c", cin, cout, k, &mut rng);
            let bias: Vec<f64> = (0..cout).map(|_| rng.random_range(-0.5..0.5)).collect();
            conv.params_mut()[1].value = Tensor::from_vec(&[cout], bias.clone()).unwrap();
            let wflat = conv.weights()[0].value.data().to_vec();
            let got = conv.infer(&tensor(&x)).unwrap();
            let want = naive_conv(&x, &kernel_from_flat(&wflat, k[0], k[1], cin, cout), &bias);
            max_rel_err(got.data(), &flatten(&want), 1e-12)
        })
        .collect()
}

/// Runs `count` random decomposed convolutions against [`naive_decomposed`].
pub fn decomposed_conv_cases(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let cin = 4 * rng.random_range(1..=3);
            let cout = 4 * rng.random_range(1..=3);
            let (h, w) = (rng.random_range(1..=6), rng.random_range(1..=6));
            let n = rng.random_range(1..=2);
            let x = random_img(&mut rng, n, h, w, cin);
            let spec = DecomposedConvSpec::new(cin, cout).unwrap();
            let q = cout / 4;
            let sizes = [(3, cin / 4), (1, cin / 2), (1, cin / 2), (1, cin)];
            let raw: Vec<(Vec<f64>, Vec<f64>)> = sizes
                .iter()
                .map(|&(k, ci)| {
                    let w = (0..k * k * ci * q).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let b = (0..q).map(|_| rng.random_range(-0.5..0.5)).collect();
                    (w, b)
                })
                .collect();
            let params: [(Tensor<f64>, Tensor<f64>); 4] = std::array::from_fn(|i| {
                let (k, ci) = sizes[i];
                (
                    Tensor::from_vec(&[k, k, ci, q], raw[i].0.clone()).unwrap(),
                    Tensor::from_vec(&[q], raw[i].1.clone()).unwrap(),
                )
            });
            let got = decomposed_conv_forward(&tensor(&x), &spec, &params).unwrap();
            let want = naive_decomposed(&x, cout, &raw);
            max_rel_err(got.data(), &flatten(&want), 1e-12)
        })
        .collect()
}

pub const GRAD_STEP: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-4;
const MAX_COORDS: usize = 48;

fn coords(rng: &mut impl Rng, len: usize) -> Vec<usize> {
    if len <= MAX_COORDS {
        (0..len).collect()
    } else {
        sample(rng, len, MAX_COORDS).into_vec()
    }
}

/// Input values kept away from zero so ReLU kinks and pooling ties stay out
/// of the difference stencil.
fn away_from_zero(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let v: f64 = rng.random_range(0.1..1.0);
            if rng.random_bool(0.5) { v } else { -v }
        })
        .collect()
}

struct Probe {
    net: Network<f64>,
    x: Tensor<f64>,
    r: Tensor<f64>,
}

impl Probe {
    /// `Σ r ⊙ net(x)` in training mode with a fixed dropout stream.
    fn objective(&mut self) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let y = self.net.forward(&self.x, Mode::Train, &mut rng).unwrap();
        y.data().iter().zip(self.r.data()).map(|(a, b)| a * b).sum()
    }
}

/// Worst relative gradient error over the input and every parameter.
pub fn check_layers(specs: Vec<LayerSpec>, input: &[usize], batch: usize, seed: u64) -> Vec<(String, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::<f64>::new(&specs, input, seed).unwrap();
    let names: Vec<String> = net.params().iter().map(|p| p.name.clone()).collect();
    for name in &names {
        for v in net.tensor_mut(name).unwrap().data_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    let mut shape = vec![batch];
    shape.extend_from_slice(input);
    let len = shape.iter().product();
    let x = Tensor::from_vec(&shape, away_from_zero(&mut rng, len)).unwrap();
    let out_shape = net
        .forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(99))
        .unwrap()
        .shape()
        .to_vec();
    let r_len = out_shape.iter().product();
    let r = Tensor::from_vec(&out_shape, (0..r_len).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let mut c = Probe { net, x, r };

    c.net.zero_grads();
    c.objective();
    let dx = c.net.backward(&c.r).unwrap();
    let grads: Vec<(String, Vec<f64>)> = c
        .net
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.grad.data().to_vec()))
        .collect();

    let mut errors = Vec::new();
    let idx = coords(&mut rng, c.x.len());
    let mut xs = c.x.data().to_vec();
    let numeric = central_diff(&mut xs, &idx, GRAD_STEP, |v| {
        c.x.data_mut().copy_from_slice(v);
        c.objective()
    });
    c.x.data_mut().copy_from_slice(&xs);
    let analytic: Vec<f64> = idx.iter().map(|&i| dx.data()[i]).collect();
    errors.push(("input".to_string(), norm_rel_err(&analytic, &numeric)));

    for (name, grad) in grads {
        let idx = coords(&mut rng, grad.len());
        let mut values = c.net.tensor_mut(&name).unwrap().data().to_vec();
        let numeric = central_diff(&mut values, &idx, GRAD_STEP, |v| {
            c.net.tensor_mut(&name).unwrap().data_mut().copy_from_slice(v);
            c.objective()
        });
        c.net.tensor_mut(&name).unwrap().data_mut().copy_from_slice(&values);
        let analytic: Vec<f64> = idx.iter().map(|&i| grad[i]).collect();
        errors.push((name, norm_rel_err(&analytic, &numeric)));
    }
    errors
}

/// One labelled gradient-check configuration.
pub struct GradCase {
    pub label: String,
    pub specs: Vec<LayerSpec>,
    pub input: Vec<usize>,
    pub batch: usize,
    pub seed: u64,
}

/// Three random trials of every layer kind, then a whole compact network.
pub fn layer_grad_cases(seed: u64) -> Vec<GradCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = |name: &str, kind| LayerSpec::new(name, kind);
    let mut out = Vec::new();
    for trial in 0..3u64 {
        let seed = 100 + trial;
        let (h, w) = (rng.random_range(2..=4) * 2, rng.random_range(2..=4) * 2);
        let cin = rng.random_range(1..=4);
        let cout = rng.random_range(1..=4);
        let k = [[3, 3], [1, 1], [3, 1]][trial as usize];
        let q = 4 * rng.random_range(1..=2);
        let cases: Vec<(&str, Vec<LayerSpec>, Vec<usize>)> = vec![
            (
                "conv2d",
                vec![spec("c", LayerKind::Conv2d { in_channels: cin, out_channels: cout, kernel: k })],
                vec![h, w, cin],
            ),
            (
                "decomposed",
                vec![spec("d", LayerKind::DecomposedConv2d { in_channels: q, out_channels: 4 * (trial as usize + 1) })],
                vec![h, w, q],
            ),
            ("batchnorm", vec![spec("bn", LayerKind::BatchNorm { channels: cin })], vec![h, w, cin]),
            ("relu", vec![spec("r", LayerKind::ReLU)], vec![h, w, cin]),
            ("avgpool", vec![spec("p", LayerKind::AvgPool { size: [2, 2] })], vec![h, w, cin]),
            ("gap", vec![spec("g", LayerKind::GlobalAvgPool)], vec![h, w, cin]),
            ("dropout", vec![spec("dr", LayerKind::Dropout { p: 0.3 })], vec![h, w, cin]),
            (
                "dense",
                vec![spec("fc", LayerKind::FullyConnected { in_features: cin + 2, out_features: cout + 1 })],
                vec![cin + 2],
            ),
            ("softmax", vec![spec("s", LayerKind::Softmax)], vec![cout + 1]),
        ];
        for (label, specs, input) in cases {
            out.push(GradCase {
                label: format!("{label} trial {trial}"),
                specs,
                input,
                batch: rng.random_range(2..=3),
                seed,
            });
        }
    }
    let model = build_cnn7(Variant::Crdc, 3).unwrap().with_input_shape([8, 8, 3]).unwrap();
    out.push(GradCase {
        label: "crdc 8x8".into(),
        specs: model.layers.clone(),
        input: vec![8, 8, 3],
        batch: 3,
        seed: 5,
    });
    out
}

fn random_probs(rng: &mut impl Rng, n: usize, c: usize) -> Tensor<f64> {
    let mut v = Vec::with_capacity(n * c);
    for _ in 0..n {
        let row: Vec<f64> = (0..c).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = row.iter().sum();
        v.extend(row.iter().map(|x| x / s));
    }
    Tensor::from_vec(&[n, c], v).unwrap()
}

/// Finite-difference errors for both losses and the penalty gradient,
/// as `(label, error)` pairs.
pub fn loss_grad_errors(seed: u64, trials: usize) -> Vec<(String, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for trial in 0..trials {
        let (n, c) = (rng.random_range(1..=4), rng.random_range(2..=6));
        let pred = random_probs(&mut rng, n, c);
        let mut onehot = Tensor::zeros(&[n, c]);
        for i in 0..n {
            onehot.data_mut()[i * c + rng.random_range(0..c)] = 1.0;
        }
        let soft = random_probs(&mut rng, n, c);
        let theta = Param::new("w", Tensor::from_vec(&[5], (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap());
        let lambda = 0.01 * (trial + 1) as f64;
        let all: Vec<usize> = (0..n * c).collect();

        let ce = cross_entropy_loss(&pred, &onehot).unwrap();
        let mut p = pred.data().to_vec();
        let num = central_diff(&mut p, &all, GRAD_STEP, |v| {
            cross_entropy_loss(&Tensor::from_vec(&[n, c], v.to_vec()).unwrap(), &onehot).unwrap().value
        });
        out.push((format!("cross-entropy trial {trial}"), norm_rel_err(ce.grad.data(), &num)));

        let kl = kl_mixup_loss(&pred, &soft, &[&theta], lambda).unwrap();
        let num = central_diff(&mut p, &all, GRAD_STEP, |v| {
            let t = Tensor::from_vec(&[n, c], v.to_vec()).unwrap();
            kl_mixup_loss(&t, &soft, &[&theta], lambda).unwrap().value
        });
        out.push((format!("kl trial {trial}"), norm_rel_err(kl.grad.data(), &num)));

        let mut th = theta.clone();
        th.grad = Tensor::zeros(&[5]);
        add_l2_gradient(&mut [&mut th], lambda);
        let mut w = theta.value.data().to_vec();
        let num = central_diff(&mut w, &[0, 1, 2, 3, 4], GRAD_STEP, |v| {
            let tp = Param::new("w", Tensor::from_vec(&[5], v.to_vec()).unwrap());
            kl_mixup_loss(&pred, &soft, &[&tp], lambda).unwrap().value
        });
        out.push((format!("l2 penalty trial {trial}"), norm_rel_err(th.grad.data(), &num)));
    }
    out
}
