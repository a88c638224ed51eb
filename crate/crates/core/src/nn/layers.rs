//! Batch norm, activations, pooling, dropout, dense and softmax layers.

use rand::Rng;

use super::init::he_normal;
use super::{Mode, Param, Scalar, Tensor};
use crate::error::{Error, Result};

fn take_cache<T>(slot: &mut Option<T>, layer: &str) -> Result<T> {
    slot.take()
        .ok_or_else(|| Error::State(format!("{layer}: backward called without a cached forward")))
}

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.99;

/// Per-channel batch normalization over every axis but the last.
#[derive(Debug, Clone)]
pub struct BatchNorm<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    cache: Option<BnCache<T>>,
}

#[derive(Debug, Clone)]
struct BnCache<T> {
    x_hat: Vec<T>,
    inv_std: Vec<T>,
    mode: Mode,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(name: &str, channels: usize) -> Self {
        BatchNorm {
            gamma: Param::new(format!("{name}.gamma"), Tensor::full(&[channels], T::one())),
            beta: Param::new(format!("{name}.beta"), Tensor::zeros(&[channels])),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.value.len()
    }

    fn check(&self, x: &Tensor<T>) -> Result<usize> {
        let c = self.channels();
        if x.shape().last() != Some(&c) {
            return Err(Error::shape("batch-norm input (channels last)", x.shape(), &[c]));
        }
        Ok(c)
    }

    fn normalize(&self, x: &Tensor<T>, mean: &[f64], inv_std: &[f64]) -> (Tensor<T>, Vec<T>) {
        let c = mean.len();
        let (g, b) = (self.gamma.value.data(), self.beta.value.data());
        let mut x_hat = Vec::with_capacity(x.len());
        let mut y = Vec::with_capacity(x.len());
        for px in x.data().chunks_exact(c) {
            for (ch, &v) in px.iter().enumerate() {
                let xh = T::lit((v.f64() - mean[ch]) * inv_std[ch]);
                x_hat.push(xh);
                y.push(g[ch] * xh + b[ch]);
            }
        }
        (Tensor::from_vec(x.shape(), y).expect("bn shape"), x_hat)
    }

    fn running_inv_std(&self) -> (Vec<f64>, Vec<f64>) {
        let mean = self.running_mean.data().iter().map(|v| v.f64()).collect();
        let inv = self
            .running_var
            .data()
            .iter()
            .map(|v| 1.0 / (v.f64() + BN_EPSILON).sqrt())
            .collect();
        (mean, inv)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(x)?;
        let (mean, inv) = self.running_inv_std();
        Ok(self.normalize(x, &mean, &inv).0)
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let c = self.check(x)?;
        let (mean, inv) = match mode {
            Mode::Infer => self.running_inv_std(),
            Mode::Train => {
                let m = (x.len() / c) as f64;
                let mut mean = vec![0.0; c];
                for px in x.data().chunks_exact(c) {
                    for (acc, v) in mean.iter_mut().zip(px) {
                        *acc += v.f64();
                    }
                }
                mean.iter_mut().for_each(|v| *v /= m);
                let mut var = vec![0.0; c];
                for px in x.data().chunks_exact(c) {
                    for ((acc, v), mu) in var.iter_mut().zip(px).zip(&mean) {
                        *acc += (v.f64() - mu).powi(2);
                    }
                }
                var.iter_mut().for_each(|v| *v /= m);
                for ch in 0..c {
                    let rm = &mut self.running_mean.data_mut()[ch];
                    *rm = T::lit(BN_MOMENTUM * rm.f64() + (1.0 - BN_MOMENTUM) * mean[ch]);
                    let rv = &mut self.running_var.data_mut()[ch];
                    *rv = T::lit(BN_MOMENTUM * rv.f64() + (1.0 - BN_MOMENTUM) * var[ch]);
                }
                let inv = var.iter().map(|v| 1.0 / (v + BN_EPSILON).sqrt()).collect();
                (mean, inv)
            }
        };
        let (y, x_hat) = self.normalize(x, &mean, &inv);
        self.cache = Some(BnCache {
            x_hat,
            inv_std: inv.into_iter().map(T::lit).collect(),
            mode,
        });
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<T>, layer: &str) -> Result<Tensor<T>> {
        let cache = take_cache(&mut self.cache, layer)?;
        let c = self.channels();
        if dy.len() != cache.x_hat.len() {
            return Err(Error::shape(format!("{layer} upstream gradient"), dy.shape(), &[cache.x_hat.len()]));
        }
        let mut sum_dy = vec![0.0; c];
        let mut sum_dy_xhat = vec![0.0; c];
        for (dpx, xpx) in dy.data().chunks_exact(c).zip(cache.x_hat.chunks_exact(c)) {
            for ch in 0..c {
                sum_dy[ch] += dpx[ch].f64();
                sum_dy_xhat[ch] += dpx[ch].f64() * xpx[ch].f64();
            }
        }
        for ch in 0..c {
            self.gamma.grad.data_mut()[ch] += T::lit(sum_dy_xhat[ch]);
            self.beta.grad.data_mut()[ch] += T::lit(sum_dy[ch]);
        }
        let m = (dy.len() / c) as f64;
        let g = self.gamma.value.data();
        let scale: Vec<f64> = g.iter().zip(&cache.inv_std).map(|(g, s)| g.f64() * s.f64()).collect();
        let mut dx = Vec::with_capacity(dy.len());
        for (dpx, xpx) in dy.data().chunks_exact(c).zip(cache.x_hat.chunks_exact(c)) {
            for ch in 0..c {
                let d = dpx[ch].f64();
                dx.push(T::lit(match cache.mode {
                    Mode::Infer => scale[ch] * d,
                    Mode::Train => {
                        scale[ch] * (d - sum_dy[ch] / m - xpx[ch].f64() * sum_dy_xhat[ch] / m)
                    }
                }));
            }
        }
        Tensor::from_vec(dy.shape(), dx)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Relu<T> {
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Relu<T> {
    pub fn infer(&self, x: &Tensor<T>) -> Tensor<T> {
        x.map(|v| v.max(T::zero()))
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Tensor<T> {
        self.input = Some(x.clone());
        self.infer(x)
    }

    pub fn backward(&mut self, dy: &Tensor<T>, layer: &str) -> Result<Tensor<T>> {
        let x = take_cache(&mut self.input, layer)?;
        dy.expect_shape(&format!("{layer} upstream gradient"), x.shape())?;
        let data = x
            .data()
            .iter()
            .zip(dy.data())
            .map(|(&xv, &d)| if xv > T::zero() { d } else { T::zero() })
            .collect();
        Tensor::from_vec(x.shape(), data)
    }
}

/// Non-overlapping average pooling; trailing rows/columns are dropped.
#[derive(Debug, Clone)]
pub struct AvgPool {
    pub size: [usize; 2],
    input_shape: Option<Vec<usize>>,
}

impl AvgPool {
    pub fn new(size: [usize; 2]) -> Self {
        AvgPool {
            size,
            input_shape: None,
        }
    }

    fn dims(&self, shape: &[usize]) -> Result<[usize; 4]> {
        match shape {
            &[n, h, w, c] if h >= self.size[0] && w >= self.size[1] => Ok([n, h, w, c]),
            s => Err(Error::shape("average-pool input [N×H×W×C]", s, &[0, self.size[0], self.size[1], 0])),
        }
    }

    pub fn infer<T: Scalar>(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let [n, h, w, c] = self.dims(x.shape())?;
        let [ph, pw] = self.size;
        let (oh, ow) = (h / ph, w / pw);
        let scale = T::lit(1.0 / (ph * pw) as f64);
        let mut out = Tensor::zeros(&[n, oh, ow, c]);
        let xd = x.data();
        let od = out.data_mut();
        for b in 0..n {
            for i in 0..oh {
                for j in 0..ow {
                    let o = ((b * oh + i) * ow + j) * c;
                    for di in 0..ph {
                        for dj in 0..pw {
                            let s = ((b * h + i * ph + di) * w + j * pw + dj) * c;
                            for ch in 0..c {
                                od[o + ch] += xd[s + ch];
                            }
                        }
                    }
                    for v in &mut od[o..o + c] {
                        *v = *v * scale;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.infer(x)?;
        self.input_shape = Some(x.shape().to_vec());
        Ok(y)
    }

    pub fn backward<T: Scalar>(&mut self, dy: &Tensor<T>, layer: &str) -> Result<Tensor<T>> {
        let shape = take_cache(&mut self.input_shape, layer)?;
        let [n, h, w, c] = self.dims(&shape)?;
        let [ph, pw] = self.size;
        let (oh, ow) = (h / ph, w / pw);
        dy.expect_shape(&format!("{layer} upstream gradient"), &[n, oh, ow, c])?;
        let scale = T::lit(1.0 / (ph * pw) as f64);
        let mut dx = Tensor::zeros(&shape);
        let dd = dy.data();
        let xd = dx.data_mut();
        for b in 0..n {
            for i in 0..oh {
                for j in 0..ow {
                    let o = ((b * oh + i) * ow + j) * c;
                    for di in 0..ph {
                        for dj in 0..pw {
                            let s = ((b * h + i * ph + di) * w + j * pw + dj) * c;
                            for ch in 0..c {
                                xd[s + ch] = dd[o + ch] * scale;
                            }
                        }
                    }
                }
            }
        }
        Ok(dx)
    }
}

/// Spatial mean per channel, `[N×H×W×C] → [N×C]`.
#[derive(Debug, Clone, Default)]
pub struct GlobalAvgPool {
    input_shape: Option<Vec<usize>>,
}

impl GlobalAvgPool {
    pub fn infer<T: Scalar>(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let &[n, h, w, c] = x.shape() else {
            return Err(Error::shape("global-pool input [N×H×W×C]", x.shape(), &[0, 0, 0, 0]));
        };
        let scale = T::lit(1.0 / (h * w) as f64);
        let mut out = Tensor::zeros(&[n, c]);
        for (b, sample) in x.data().chunks(h * w * c).enumerate() {
            let o = &mut out.data_mut()[b * c..(b + 1) * c];
            for px in sample.chunks(c) {
                for (a, &v) in o.iter_mut().zip(px) {
                    *a += v;
                }
            }
            o.iter_mut().for_each(|v| *v = *v * scale);
        }
        Ok(out)
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.infer(x)?;
        self.input_shape = Some(x.shape().to_vec());
        Ok(y)
    }

    pub fn backward<T: Scalar>(&mut self, dy: &Tensor<T>, layer: &str) -> Result<Tensor<T>> {
        let shape = take_cache(&mut self.input_shape, layer)?;
        let (n, h, w, c) = (shape[0], shape[1], shape[2], shape[3]);
        dy.expect_shape(&format!("{layer} upstream gradient"), &[n, c])?;
        let scale = T::lit(1.0 / (h * w) as f64);
        let mut dx = Tensor::zeros(&shape);
        for (b, sample) in dx.data_mut().chunks_mut(h * w * c).enumerate() {
            let g = &dy.data()[b * c..(b + 1) * c];
            for px in sample.chunks_mut(c) {
                for (d, &gv) in px.iter_mut().zip(g) {
                    *d = gv * scale;
                }
            }
        }
        Ok(dx)
    }
}

/// Inverted dropout: survivors are scaled by `1 / (1 − p)` in training, and
/// inference is the identity.
#[derive(Debug, Clone)]
pub struct Dropout<T> {
    pub p: f64,
    mask: Option<Vec<T>>,
}

impl<T: Scalar> Dropout<T> {
    pub fn new(p: f64) -> Self {
        Dropout { p, mask: None }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut impl Rng) -> Tensor<T> {
        let mask: Vec<T> = if mode == Mode::Infer || self.p == 0.0 {
            vec![T::one(); x.len()]
        } else {
            let keep = T::lit(1.0 / (1.0 - self.p));
            (0..x.len())
                .map(|_| if rng.random::<f64>() < self.p { T::zero() } else { keep })
                .collect()
        };
        let y = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        self.mask = Some(mask);
        Tensor::from_vec(x.shape(), y).expect("dropout shape")
    }

    pub fn backward(&mut self, dy: &Tensor<T>, layer: &str) -> Result<Tensor<T>> {
        let mask = take_cache(&mut self.mask, layer)?;
        if mask.len() != dy.len() {
            return Err(Error::shape(format!("{layer} upstream gradient"), dy.shape(), &[mask.len()]));
        }
        let d = dy.data().iter().zip(&mask).map(|(&g, &m)| g * m).collect();
        Tensor::from_vec(dy.shape(), d)
    }
}

/// Affine map `[N×in] → [N×out]` with weight `[in×out]`.
#[derive(Debug, Clone)]
pub struct Dense<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(name: &str, in_features: usize, out_features: usize, rng: &mut impl Rng) -> Self {
        Dense {
            weight: Param::new(
                format!("{name}.weight"),
                he_normal(&[in_features, out_features], in_features, rng),
            ),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[out_features])),
            input: None,
        }
    }

    fn dims(&self) -> (usize, usize) {
        let s = self.weight.value.shape();
        (s[0], s[1])
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (fi, fo) = self.dims();
        let &[n, f] = x.shape() else {
            return Err(Error::shape("dense input [N×F]", x.shape(), &[0, fi]));
        };
        if f != fi {
            return Err(Error::shape("dense input [N×F]", x.shape(), &[n, fi]));
        }
        let w = self.weight.value.data();
        let mut out = Tensor::zeros(&[n, fo]);
        for (xr, orow) in x.data().chunks(fi).zip(out.data_mut().chunks_mut(fo)) {
            orow.copy_from_slice(self.bias.value.data());
            for (i, &xv) in xr.iter().enumerate() {
                for (o, &wv) in orow.iter_mut().zip(&w[i * fo..(i + 1) * fo]) {
                    *o += xv * wv;
                }
            }
        }
        Ok(out)
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.infer(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<T>, layer: &str) -> Result<Tensor<T>> {
        let x = take_cache(&mut self.input, layer)?;
        let (fi, fo) = self.dims();
        let n = x.batch();
        dy.expect_shape(&format!("{layer} upstream gradient"), &[n, fo])?;
        let mut dx = Tensor::zeros(&[n, fi]);
        let w = self.weight.value.data();
        for ((xr, dr), dxr) in x
            .data()
            .chunks(fi)
            .zip(dy.data().chunks(fo))
            .zip(dx.data_mut().chunks_mut(fi))
        {
            for (b, &d) in self.bias.grad.data_mut().iter_mut().zip(dr) {
                *b += d;
            }
            for i in 0..fi {
                let wrow = &w[i * fo..(i + 1) * fo];
                let gw = &mut self.weight.grad.data_mut()[i * fo..(i + 1) * fo];
                let mut acc = T::zero();
                for ((&d, &wv), g) in dr.iter().zip(wrow).zip(gw.iter_mut()) {
                    acc += d * wv;
                    *g += xr[i] * d;
                }
                dxr[i] = acc;
            }
        }
        Ok(dx)
    }
}

/// Row-wise softmax over `[N×C]`.
#[derive(Debug, Clone, Default)]
pub struct Softmax<T> {
    output: Option<Tensor<T>>,
}

pub fn softmax_rows<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let &[_, c] = x.shape() else {
        return Err(Error::shape("softmax input [N×C]", x.shape(), &[0, 0]));
    };
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(c) {
        let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v = *v / sum);
    }
    Ok(out)
}

impl<T: Scalar> Softmax<T> {
    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = softmax_rows(x)?;
        self.output = Some(y.clone());
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<T>, layer: &str) -> Result<Tensor<T>> {
        let y = take_cache(&mut self.output, layer)?;
        dy.expect_shape(&format!("{layer} upstream gradient"), y.shape())?;
        let c = y.shape()[1];
        let mut dx = Tensor::zeros(y.shape());
        for ((yr, gr), dr) in y
            .data()
            .chunks(c)
            .zip(dy.data().chunks(c))
            .zip(dx.data_mut().chunks_mut(c))
        {
            let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
            for ((d, &yv), &g) in dr.iter_mut().zip(yr).zip(gr) {
                *d = yv * (g - dot);
            }
        }
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn batchnorm_train_standardizes() {
        let mut bn = BatchNorm::<f64>::new("bn", 2);
        let x = Tensor::from_vec(&[4, 2], vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0]).unwrap();
        let y = bn.forward(&x, Mode::Train).unwrap();
        for ch in 0..2 {
            let v: Vec<f64> = y.data().iter().skip(ch).step_by(2).cloned().collect();
            let mean = v.iter().sum::<f64>() / 4.0;
            let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-4);
        }
        assert!((bn.running_mean.data()[0] - 0.025).abs() < 1e-12);
    }

    #[test]
    fn batchnorm_infer_identity_with_default_stats() {
        let bn = BatchNorm::<f64>::new("bn", 3);
        let x = Tensor::from_vec(&[1, 2, 1, 3], vec![0.5, -1.0, 2.0, 3.0, 0.0, -4.0]).unwrap();
        let y = bn.infer(&x).unwrap();
        for (a, b) in x.data().iter().zip(y.data()) {
            assert!((a - b).abs() < 1e-5 * a.abs().max(1.0));
        }
    }

    #[test]
    fn batchnorm_constant_channel_gives_beta() {
        let mut bn = BatchNorm::<f32>::new("bn", 1);
        bn.beta.value.data_mut()[0] = 0.25;
        let y = bn.forward(&Tensor::full(&[3, 2, 2, 1], 5.0), Mode::Train).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn softmax_uniform_and_normalized() {
        let y = softmax_rows(&Tensor::<f64>::full(&[2, 10], 3.3)).unwrap();
        assert!(y.data().iter().all(|&v| (v - 0.1).abs() < 1e-15));
        let z = softmax_rows(&Tensor::<f32>::from_vec(&[1, 3], vec![1000.0, 0.0, -1000.0]).unwrap()).unwrap();
        assert!((z.data().iter().sum::<f32>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gap_of_constant_map() {
        let x = Tensor::<f32>::full(&[2, 3, 4, 5], 1.5);
        let y = GlobalAvgPool::default().infer(&x).unwrap();
        assert_eq!(y.shape(), &[2, 5]);
        assert!(y.data().iter().all(|&v| (v - 1.5).abs() < 1e-6));
    }

    #[test]
    fn dropout_zero_is_identity_and_train_scales() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::<f64>::full(&[1, 1000], 1.0);
        for mode in [Mode::Train, Mode::Infer] {
            assert_eq!(Dropout::new(0.0).forward(&x, mode, &mut rng), x);
        }
        assert_eq!(Dropout::new(0.5).forward(&x, Mode::Infer, &mut rng), x);
        let y = Dropout::new(0.1).forward(&x, Mode::Train, &mut rng);
        let dropped = y.data().iter().filter(|&&v| v == 0.0).count();
        assert!((50..150).contains(&dropped));
        assert!(y.data().iter().all(|&v| v == 0.0 || (v - 1.0 / 0.9).abs() < 1e-12));
    }

    #[test]
    fn relu_gradient_is_zero_for_negatives() {
        let mut r = Relu::<f64>::default();
        let x = Tensor::from_vec(&[1, 3], vec![-2.0, 0.5, -0.1]).unwrap();
        r.forward(&x);
        let g = r.backward(&Tensor::full(&[1, 3], 1.0), "relu").unwrap();
        assert_eq!(g.data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn avgpool_halves_with_floor() {
        let x = Tensor::<f32>::from_vec(&[1, 3, 3, 1], (0..9).map(|v| v as f32).collect()).unwrap();
        let y = AvgPool::new([2, 2]).infer(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[(0.0 + 1.0 + 3.0 + 4.0) / 4.0]);
    }
}
