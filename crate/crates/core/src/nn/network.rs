use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::conv::ConvBank;
use super::layers::{AvgPool, BatchNorm, Dense, Dropout, GlobalAvgPool, Relu, Softmax};
use super::spec::{shape_ledger, LayerKind, LayerSpec};
use super::{Mode, Param, Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum Layer<T> {
    Conv(ConvBank<T>),
    BatchNorm(BatchNorm<T>),
    Relu(Relu<T>),
    AvgPool(AvgPool),
    GlobalAvgPool(GlobalAvgPool),
    Dropout(Dropout<T>),
    Dense(Dense<T>),
    Softmax(Softmax<T>),
}

impl<T: Scalar> Layer<T> {
    pub fn build(spec: &LayerSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        let name = spec.name.as_str();
        Ok(match spec.kind {
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
            } => Layer::Conv(ConvBank::standard(name, in_channels, out_channels, kernel, rng)),
            LayerKind::DecomposedConv2d {
                in_channels,
                out_channels,
            } => Layer::Conv(ConvBank::decomposed(name, in_channels, out_channels, rng)?),
            LayerKind::BatchNorm { channels } => Layer::BatchNorm(BatchNorm::new(name, channels)),
            LayerKind::ReLU => Layer::Relu(Relu::default()),
            LayerKind::AvgPool { size } => Layer::AvgPool(AvgPool::new(size)),
            LayerKind::GlobalAvgPool => Layer::GlobalAvgPool(GlobalAvgPool::default()),
            LayerKind::Dropout { p } => Layer::Dropout(Dropout::new(p)),
            LayerKind::FullyConnected {
                in_features,
                out_features,
            } => Layer::Dense(Dense::new(name, in_features, out_features, rng)),
            LayerKind::Softmax => Layer::Softmax(Softmax::default()),
        })
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut ChaCha8Rng) -> Result<Tensor<T>> {
        match self {
            Layer::Conv(l) => l.forward(x),
            Layer::BatchNorm(l) => l.forward(x, mode),
            Layer::Relu(l) => Ok(l.forward(x)),
            Layer::AvgPool(l) => l.forward(x),
            Layer::GlobalAvgPool(l) => l.forward(x),
            Layer::Dropout(l) => Ok(l.forward(x, mode, rng)),
            Layer::Dense(l) => l.forward(x),
            Layer::Softmax(l) => l.forward(x),
        }
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Conv(l) => l.infer(x),
            Layer::BatchNorm(l) => l.infer(x),
            Layer::Relu(l) => Ok(l.infer(x)),
            Layer::AvgPool(l) => l.infer(x),
            Layer::GlobalAvgPool(l) => l.infer(x),
            Layer::Dropout(_) => Ok(x.clone()),
            Layer::Dense(l) => l.infer(x),
            Layer::Softmax(_) => super::layers::softmax_rows(x),
        }
    }

    pub fn backward(&mut self, dy: &Tensor<T>, name: &str) -> Result<Tensor<T>> {
        match self {
            Layer::Conv(l) => l.backward(dy, name),
            Layer::BatchNorm(l) => l.backward(dy, name),
            Layer::Relu(l) => l.backward(dy, name),
            Layer::AvgPool(l) => l.backward(dy, name),
            Layer::GlobalAvgPool(l) => l.backward(dy, name),
            Layer::Dropout(l) => l.backward(dy, name),
            Layer::Dense(l) => l.backward(dy, name),
            Layer::Softmax(l) => l.backward(dy, name),
        }
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        match self {
            Layer::Conv(l) => l.params(),
            Layer::BatchNorm(l) => vec![&l.gamma, &l.beta],
            Layer::Dense(l) => vec![&l.weight, &l.bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        match self {
            Layer::Conv(l) => l.params_mut(),
            Layer::BatchNorm(l) => vec![&mut l.gamma, &mut l.beta],
            Layer::Dense(l) => vec![&mut l.weight, &mut l.bias],
            _ => Vec::new(),
        }
    }
}

/// Sequential network over NHWC batches.
#[derive(Debug, Clone)]
pub struct Network<T> {
    specs: Vec<LayerSpec>,
    layers: Vec<Layer<T>>,
    input_shape: Vec<usize>,
}

impl<T: Scalar> Network<T> {
    /// Shape-checks `specs` against the per-sample `input_shape` and
    /// initializes parameters from `seed`.
    pub fn new(specs: &[LayerSpec], input_shape: &[usize], seed: u64) -> Result<Self> {
        shape_ledger(specs, input_shape)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .iter()
            .map(|s| Layer::build(s, &mut rng))
            .collect::<Result<_>>()?;
        Ok(Network {
            specs: specs.to_vec(),
            layers,
            input_shape: input_shape.to_vec(),
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.shape().len() != self.input_shape.len() + 1 || x.shape()[1..] != self.input_shape[..] {
            let mut expected = vec![x.batch()];
            expected.extend_from_slice(&self.input_shape);
            return Err(Error::shape("network input", x.shape(), &expected));
        }
        Ok(())
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut ChaCha8Rng) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = layer.forward(&h, mode, rng)?;
        }
        Ok(h)
    }

    /// Read-only inference: dropout is the identity and batch norm uses running statistics.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.infer(&h)?;
        }
        Ok(h)
    }

    /// Back-propagates the gradient of the network output, accumulating into
    /// every parameter's `grad`; returns the input gradient.
    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = dy.clone();
        for (layer, spec) in self.layers.iter_mut().zip(&self.specs).rev() {
            g = layer.backward(&g, &spec.name)?;
        }
        Ok(g)
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.grad.fill(T::zero());
        }
    }

    pub fn trainable_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    /// Non-trainable batch-norm statistics as `(name, tensor)` pairs.
    pub fn buffers(&self) -> Vec<(String, &Tensor<T>)> {
        self.layers
            .iter()
            .zip(&self.specs)
            .filter_map(|(l, s)| match l {
                Layer::BatchNorm(bn) => Some([
                    (format!("{}.running_mean", s.name), &bn.running_mean),
                    (format!("{}.running_var", s.name), &bn.running_var),
                ]),
                _ => None,
            })
            .flatten()
            .collect()
    }

    /// Looks up any parameter or buffer by name for overwriting.
    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        let idx = self.layers.iter().zip(&self.specs).position(|(l, s)| {
            l.params().iter().any(|p| p.name == name)
                || (matches!(l, Layer::BatchNorm(_))
                    && (name == format!("{}.running_mean", s.name)
                        || name == format!("{}.running_var", s.name)))
        })?;
        let buffer = if matches!(self.layers[idx], Layer::BatchNorm(_)) {
            if name.ends_with(".running_mean") {
                Some(true)
            } else if name.ends_with(".running_var") {
                Some(false)
            } else {
                None
            }
        } else {
            None
        };
        match (&mut self.layers[idx], buffer) {
            (Layer::BatchNorm(bn), Some(true)) => Some(&mut bn.running_mean),
            (Layer::BatchNorm(bn), Some(false)) => Some(&mut bn.running_var),
            (layer, _) => layer
                .params_mut()
                .into_iter()
                .find(|p| p.name == name)
                .map(|p| &mut p.value),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let mut out = Network::<U>::new(&self.specs, &self.input_shape, 0).expect("same specs");
        for p in self.params() {
            *out.tensor_mut(&p.name).expect("same names") = p.value.cast();
        }
        for (name, t) in self.buffers() {
            *out.tensor_mut(&name).expect("same names") = t.cast();
        }
        out
    }
}
