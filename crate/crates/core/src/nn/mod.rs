//! Dense-tensor network engine with hand-written reverse-mode gradients.

mod adam;
pub mod conv;
mod init;
pub mod layers;
mod network;
mod spec;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use conv::{decomposed_paths, ConvBank, ConvPath};
pub use init::he_normal;
pub use network::{Layer, Network};
pub use spec::{shape_ledger, LayerKind, LayerSpec};
pub use tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// A named trainable tensor with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param {
            name: name.into(),
            value,
            grad,
        }
    }
}
