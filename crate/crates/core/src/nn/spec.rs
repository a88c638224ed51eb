//! Declarative layer descriptions shared by the executor and the auditor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum LayerKind {
    /// Stride-1, same-padded convolution.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 2],
    },
    BatchNorm {
        channels: usize,
    },
    ReLU,
    AvgPool {
        size: [usize; 2],
    },
    GlobalAvgPool,
    Dropout {
        p: f64,
    },
    FullyConnected {
        in_features: usize,
        out_features: usize,
    },
    Softmax,
    /// Four parallel sub-convolutions whose outputs are concatenated along
    /// channels (see [`crate::cnn7::DecomposedConvSpec`]).
    DecomposedConv2d {
        in_channels: usize,
        out_channels: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        LayerSpec {
            name: name.into(),
            kind,
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |expected: &[usize]| Error::shape(format!("layer {}", self.name), input, expected);
        match &self.kind {
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
            } => {
                if kernel[0] % 2 == 0 || kernel[1] % 2 == 0 {
                    return Err(Error::Config(format!(
                        "layer {}: same padding needs odd kernel extents, got {kernel:?}",
                        self.name
                    )));
                }
                match input {
                    [h, w, c] if c == in_channels => Ok(vec![*h, *w, *out_channels]),
                    _ => Err(bad(&[0, 0, *in_channels])),
                }
            }
            LayerKind::DecomposedConv2d {
                in_channels,
                out_channels,
            } => {
                if in_channels % 4 != 0 || out_channels % 4 != 0 {
                    return Err(Error::Config(format!(
                        "layer {}: decomposed convolution needs channel counts divisible by 4, got {in_channels}→{out_channels}",
                        self.name
                    )));
                }
                match input {
                    [h, w, c] if c == in_channels => Ok(vec![*h, *w, *out_channels]),
                    _ => Err(bad(&[0, 0, *in_channels])),
                }
            }
            LayerKind::BatchNorm { channels } => match input.last() {
                Some(c) if c == channels => Ok(input.to_vec()),
                _ => Err(bad(&[*channels])),
            },
            LayerKind::ReLU | LayerKind::Softmax => Ok(input.to_vec()),
            LayerKind::Dropout { p } => {
                if !(0.0..1.0).contains(p) {
                    return Err(Error::Config(format!(
                        "layer {}: dropout probability {p} outside [0, 1)",
                        self.name
                    )));
                }
                Ok(input.to_vec())
            }
            LayerKind::AvgPool { size } => match input {
                [h, w, c] if *h >= size[0] && *w >= size[1] && size[0] > 0 && size[1] > 0 => {
                    Ok(vec![h / size[0], w / size[1], *c])
                }
                _ => Err(bad(&[size[0], size[1], 0])),
            },
            LayerKind::GlobalAvgPool => match input {
                [_, _, c] => Ok(vec![*c]),
                _ => Err(bad(&[0, 0, 0])),
            },
            LayerKind::FullyConnected {
                in_features,
                out_features,
            } => match input {
                [n] if n == in_features => Ok(vec![*out_features]),
                _ => Err(bad(&[*in_features])),
            },
        }
    }
}

/// Shapes after each layer, starting from `input`.
pub fn shape_ledger(layers: &[LayerSpec], input: &[usize]) -> Result<Vec<Vec<usize>>> {
    let mut shape = input.to_vec();
    let mut out = Vec::with_capacity(layers.len());
    for layer in layers {
        shape = layer.output_shape(&shape)?;
        out.push(shape.clone());
    }
    Ok(out)
}
