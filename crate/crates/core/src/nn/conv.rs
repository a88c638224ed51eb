//! Same-padded stride-1 convolutions over NHWC batches.
//!
//! A [`ConvBank`] is a set of convolution paths that each read a contiguous
//! input-channel range and write a contiguous output-channel range of a
//! shared output, so a plain convolution is a bank with one path and a
//! decomposed convolution is a bank with four. Concatenation falls out of the
//! output-channel offsets without copying.

use rand::Rng;
use rayon::prelude::*;

use super::init::he_normal;
use super::{Param, Scalar, Tensor};
use crate::error::{Error, Result};

/// One sub-convolution inside a bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvPath {
    pub kernel: [usize; 2],
    pub in_offset: usize,
    pub in_channels: usize,
    pub out_offset: usize,
    pub out_channels: usize,
}

impl ConvPath {
    pub fn weight_count(&self) -> usize {
        self.kernel[0] * self.kernel[1] * self.in_channels * self.out_channels
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.kernel[0], self.kernel[1], self.in_channels, self.out_channels]
    }
}

/// Channel routing of the four decomposed paths: `[3×3]` over the first input
/// quarter, `[1×1]` over the first half, `[1×1]` over the second half, and
/// `[1×1]` over all inputs; each produces a quarter of the outputs.
pub fn decomposed_paths(in_channels: usize, out_channels: usize) -> Result<[ConvPath; 4]> {
    if !in_channels.is_multiple_of(4) || !out_channels.is_multiple_of(4) || in_channels == 0 || out_channels == 0 {
        return Err(Error::Config(format!(
            "decomposed convolution needs positive channel counts divisible by 4, got {in_channels}→{out_channels}"
        )));
    }
    let q = out_channels / 4;
    Ok([
        ConvPath {
            kernel: [3, 3],
            in_offset: 0,
            in_channels: in_channels / 4,
            out_offset: 0,
            out_channels: q,
        },
        ConvPath {
            kernel: [1, 1],
            in_offset: 0,
            in_channels: in_channels / 2,
            out_offset: q,
            out_channels: q,
        },
        ConvPath {
            kernel: [1, 1],
            in_offset: in_channels / 2,
            in_channels: in_channels / 2,
            out_offset: 2 * q,
            out_channels: q,
        },
        ConvPath {
            kernel: [1, 1],
            in_offset: 0,
            in_channels,
            out_offset: 3 * q,
            out_channels: q,
        },
    ])
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    h: usize,
    w: usize,
    c_in: usize,
    c_out: usize,
}

fn path_forward<T: Scalar>(
    g: Geometry,
    path: &ConvPath,
    x: &[T],
    weight: &[T],
    bias: &[T],
    out: &mut [T],
) {
    let [kh, kw] = path.kernel;
    let (ph, pw) = (kh / 2, kw / 2);
    let (cin, cout) = (path.in_channels, path.out_channels);
    for oh in 0..g.h {
        for ow in 0..g.w {
            let o = (oh * g.w + ow) * g.c_out + path.out_offset;
            let out_px = &mut out[o..o + cout];
            out_px.copy_from_slice(bias);
            for ki in 0..kh {
                let Some(ih) = (oh + ki).checked_sub(ph).filter(|&v| v < g.h) else {
                    continue;
                };
                for kj in 0..kw {
                    let Some(iw) = (ow + kj).checked_sub(pw).filter(|&v| v < g.w) else {
                        continue;
                    };
                    let xi = (ih * g.w + iw) * g.c_in + path.in_offset;
                    let x_px = &x[xi..xi + cin];
                    let wbase = (ki * kw + kj) * cin * cout;
                    for (ci, &xv) in x_px.iter().enumerate() {
                        let wrow = &weight[wbase + ci * cout..wbase + (ci + 1) * cout];
                        for (o, &wv) in out_px.iter_mut().zip(wrow) {
                            *o += xv * wv;
                        }
                    }
                }
            }
        }
    }
}

/// Accumulates input, weight and bias gradients of one path for one sample.
#[allow(clippy::too_many_arguments)]
fn path_backward<T: Scalar>(
    g: Geometry,
    path: &ConvPath,
    x: &[T],
    weight: &[T],
    dy: &[T],
    dx: &mut [T],
    dw: &mut [T],
    db: &mut [T],
) {
    let [kh, kw] = path.kernel;
    let (ph, pw) = (kh / 2, kw / 2);
    let (cin, cout) = (path.in_channels, path.out_channels);
    for oh in 0..g.h {
        for ow in 0..g.w {
            let o = (oh * g.w + ow) * g.c_out + path.out_offset;
            let dy_px = &dy[o..o + cout];
            for (b, &d) in db.iter_mut().zip(dy_px) {
                *b += d;
            }
            for ki in 0..kh {
                let Some(ih) = (oh + ki).checked_sub(ph).filter(|&v| v < g.h) else {
                    continue;
                };
                for kj in 0..kw {
                    let Some(iw) = (ow + kj).checked_sub(pw).filter(|&v| v < g.w) else {
                        continue;
                    };
                    let xi = (ih * g.w + iw) * g.c_in + path.in_offset;
                    let wbase = (ki * kw + kj) * cin * cout;
                    for ci in 0..cin {
                        let xv = x[xi + ci];
                        let r = wbase + ci * cout..wbase + (ci + 1) * cout;
                        let wrow = &weight[r.clone()];
                        let dwrow = &mut dw[r];
                        let mut acc = T::zero();
                        for ((&d, &wv), dwv) in dy_px.iter().zip(wrow).zip(dwrow.iter_mut()) {
                            acc += d * wv;
                            *dwv += xv * d;
                        }
                        dx[xi + ci] += acc;
                    }
                }
            }
        }
    }
}

/// Convolution layer made of one or more channel-routed paths.
#[derive(Debug, Clone)]
pub struct ConvBank<T> {
    in_channels: usize,
    out_channels: usize,
    paths: Vec<ConvPath>,
    weights: Vec<Param<T>>,
    biases: Vec<Param<T>>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> ConvBank<T> {
    pub fn new(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        paths: Vec<ConvPath>,
        rng: &mut impl Rng,
    ) -> Self {
        let single = paths.len() == 1;
        let mut weights = Vec::with_capacity(paths.len());
        let mut biases = Vec::with_capacity(paths.len());
        for (i, p) in paths.iter().enumerate() {
            let prefix = if single {
                name.to_string()
            } else {
                format!("{name}.p{}", i + 1)
            };
            let fan_in = p.kernel[0] * p.kernel[1] * p.in_channels;
            let w = he_normal(&p.weight_shape(), fan_in, rng);
            weights.push(Param::new(format!("{prefix}.weight"), w));
            biases.push(Param::new(
                format!("{prefix}.bias"),
                Tensor::zeros(&[p.out_channels]),
            ));
        }
        ConvBank {
            in_channels,
            out_channels,
            paths,
            weights,
            biases,
            input: None,
        }
    }

    pub fn standard(name: &str, in_channels: usize, out_channels: usize, kernel: [usize; 2], rng: &mut impl Rng) -> Self {
        let path = ConvPath {
            kernel,
            in_offset: 0,
            in_channels,
            out_offset: 0,
            out_channels,
        };
        Self::new(name, in_channels, out_channels, vec![path], rng)
    }

    pub fn decomposed(name: &str, in_channels: usize, out_channels: usize, rng: &mut impl Rng) -> Result<Self> {
        let paths = decomposed_paths(in_channels, out_channels)?;
        Ok(Self::new(name, in_channels, out_channels, paths.to_vec(), rng))
    }

    pub fn paths(&self) -> &[ConvPath] {
        &self.paths
    }

    pub fn weights(&self) -> &[Param<T>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Param<T>] {
        &self.biases
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w, b]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    fn geometry(&self, x: &Tensor<T>) -> Result<Geometry> {
        match x.shape() {
            &[_, h, w, c] if c == self.in_channels => Ok(Geometry {
                h,
                w,
                c_in: c,
                c_out: self.out_channels,
            }),
            s => Err(Error::shape(
                "convolution input [N×H×W×C]",
                s,
                &[x.batch(), 0, 0, self.in_channels],
            )),
        }
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.geometry(x)?;
        let n = x.batch();
        let mut out = Tensor::zeros(&[n, g.h, g.w, g.c_out]);
        let in_len = g.h * g.w * g.c_in;
        let out_len = g.h * g.w * g.c_out;
        out.data_mut()
            .par_chunks_mut(out_len)
            .zip(x.data().par_chunks(in_len))
            .for_each(|(o, xs)| {
                for ((p, w), b) in self.paths.iter().zip(&self.weights).zip(&self.biases) {
                    path_forward(g, p, xs, w.value.data(), b.value.data(), o);
                }
            });
        Ok(out)
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let out = self.infer(x)?;
        self.input = Some(x.clone());
        Ok(out)
    }

    pub fn backward(&mut self, dy: &Tensor<T>, layer: &str) -> Result<Tensor<T>> {
        let x = self
            .input
            .take()
            .ok_or_else(|| Error::State(format!("{layer}: backward called without a cached forward")))?;
        let g = self.geometry(&x)?;
        let n = x.batch();
        dy.expect_shape(&format!("{layer} upstream gradient"), &[n, g.h, g.w, g.c_out])?;
        let in_len = g.h * g.w * g.c_in;
        let out_len = g.h * g.w * g.c_out;
        let mut dx = Tensor::zeros(x.shape());
        // per-sample parameter gradients, reduced below in sample order
        let partials: Vec<Vec<(Vec<T>, Vec<T>)>> = dx
            .data_mut()
            .par_chunks_mut(in_len)
            .zip(x.data().par_chunks(in_len))
            .zip(dy.data().par_chunks(out_len))
            .map(|((dxs, xs), dys)| {
                self.paths
                    .iter()
                    .zip(&self.weights)
                    .map(|(p, w)| {
                        let mut dw = vec![T::zero(); p.weight_count()];
                        let mut db = vec![T::zero(); p.out_channels];
                        path_backward(g, p, xs, w.value.data(), dys, dxs, &mut dw, &mut db);
                        (dw, db)
                    })
                    .collect()
            })
            .collect();
        for sample in partials {
            for ((dw, db), (w, b)) in sample
                .into_iter()
                .zip(self.weights.iter_mut().zip(self.biases.iter_mut()))
            {
                for (g, d) in w.grad.data_mut().iter_mut().zip(dw) {
                    *g += d;
                }
                for (g, d) in b.grad.data_mut().iter_mut().zip(db) {
                    *g += d;
                }
            }
        }
        Ok(dx)
    }
}
