//! CNN-7 model descriptions: the baseline, the channel-restricted (CR)
//! variant, and CR with decomposed convolutions (CRDC).

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    decomposed_paths, shape_ledger, ConvBank, ConvPath, LayerKind, LayerSpec, Network, Param,
    Scalar, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Baseline,
    Cr,
    Crdc,
}

impl Variant {
    /// Output channels of the six convolution blocks.
    pub fn channel_ladder(self) -> [usize; 6] {
        match self {
            Variant::Baseline => [32, 32, 64, 64, 128, 128],
            Variant::Cr | Variant::Crdc => [16, 32, 32, 32, 64, 64],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Cr => "cr",
            Variant::Crdc => "crdc",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', '+', '&'], "").as_str() {
            "baseline" => Ok(Variant::Baseline),
            "cr" => Ok(Variant::Cr),
            "crdc" => Ok(Variant::Crdc),
            other => Err(Error::Config(format!(
                "unknown model variant {other:?} (expected baseline, cr or crdc)"
            ))),
        }
    }
}

pub const DEFAULT_INPUT_SHAPE: [usize; 3] = [128, 128, 3];
pub const DROPOUT: f64 = 0.1;
/// Blocks followed by 2×2 average pooling (1-based).
const POOLED_BLOCKS: [usize; 3] = [2, 4, 5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub variant: Variant,
    pub class_count: usize,
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
}

/// Builds the layer sequence block by block: BN → Conv → ReLU → BN →
/// (AvgPool after blocks 2, 4, 5) → Dropout(0.1); the sixth block uses
/// global average pooling; then FC → Softmax.
pub fn build_cnn7(variant: Variant, class_count: usize) -> Result<ModelSpec> {
    if class_count < 2 {
        return Err(Error::Config(format!(
            "class_count must be at least 2, got {class_count}"
        )));
    }
    let ladder = variant.channel_ladder();
    let mut layers = Vec::new();
    let mut c_in = DEFAULT_INPUT_SHAPE[2];
    for (i, &c_out) in ladder.iter().enumerate() {
        let b = i + 1;
        let name = |part: &str| format!("b{b}.{part}");
        layers.push(LayerSpec::new(name("bn_in"), LayerKind::BatchNorm { channels: c_in }));
        let decompose = variant == Variant::Crdc && c_in.is_multiple_of(4) && c_out % 4 == 0;
        let conv = if decompose {
            LayerKind::DecomposedConv2d {
                in_channels: c_in,
                out_channels: c_out,
            }
        } else {
            LayerKind::Conv2d {
                in_channels: c_in,
                out_channels: c_out,
                kernel: [3, 3],
            }
        };
        layers.push(LayerSpec::new(name("conv"), conv));
        layers.push(LayerSpec::new(name("relu"), LayerKind::ReLU));
        layers.push(LayerSpec::new(name("bn_out"), LayerKind::BatchNorm { channels: c_out }));
        if POOLED_BLOCKS.contains(&b) {
            layers.push(LayerSpec::new(name("pool"), LayerKind::AvgPool { size: [2, 2] }));
        }
        if b == ladder.len() {
            layers.push(LayerSpec::new(name("gap"), LayerKind::GlobalAvgPool));
        }
        layers.push(LayerSpec::new(name("dropout"), LayerKind::Dropout { p: DROPOUT }));
        c_in = c_out;
    }
    layers.push(LayerSpec::new(
        "fc",
        LayerKind::FullyConnected {
            in_features: c_in,
            out_features: class_count,
        },
    ));
    layers.push(LayerSpec::new("softmax", LayerKind::Softmax));
    let spec = ModelSpec {
        variant,
        class_count,
        input_shape: DEFAULT_INPUT_SHAPE,
        layers,
    };
    spec.shape_ledger()?;
    Ok(spec)
}

impl ModelSpec {
    /// Same layers over a different input patch size (e.g. small test patches).
    pub fn with_input_shape(mut self, input_shape: [usize; 3]) -> Result<Self> {
        self.input_shape = input_shape;
        self.shape_ledger()?;
        Ok(self)
    }

    /// Output shape after every layer.
    pub fn shape_ledger(&self) -> Result<Vec<Vec<usize>>> {
        shape_ledger(&self.layers, &self.input_shape)
    }

    /// Output shape of each of the six blocks, then of the classifier.
    pub fn block_outputs(&self) -> Result<Vec<Vec<usize>>> {
        let ledger = self.shape_ledger()?;
        let mut out: Vec<Vec<usize>> = self
            .layers
            .iter()
            .zip(&ledger)
            .filter(|(l, _)| l.name.ends_with(".dropout"))
            .map(|(_, s)| s.clone())
            .collect();
        out.push(ledger.last().cloned().unwrap_or_default());
        Ok(out)
    }

    pub fn network<T: Scalar>(&self, seed: u64) -> Result<Network<T>> {
        Network::new(&self.layers, &self.input_shape, seed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("model spec JSON: {e}")))?;
        spec.shape_ledger()?;
        Ok(spec)
    }

    /// Decomposed layers of this spec.
    pub fn decomposed_layers(&self) -> Vec<(String, DecomposedConvSpec)> {
        self.layers
            .iter()
            .filter_map(|l| match l.kind {
                LayerKind::DecomposedConv2d {
                    in_channels,
                    out_channels,
                } => DecomposedConvSpec::new(in_channels, out_channels)
                    .ok()
                    .map(|d| (l.name.clone(), d)),
                _ => None,
            })
            .collect()
    }
}

/// A 3×3 convolution split into four cheaper paths whose outputs are concatenated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecomposedConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
}

impl DecomposedConvSpec {
    pub fn new(in_channels: usize, out_channels: usize) -> Result<Self> {
        decomposed_paths(in_channels, out_channels)?;
        Ok(DecomposedConvSpec {
            in_channels,
            out_channels,
        })
    }

    pub fn paths(&self) -> [ConvPath; 4] {
        decomposed_paths(self.in_channels, self.out_channels).expect("validated at construction")
    }

    /// `9·(C_in/4)(C_out/4) + 2·(C_in/2)(C_out/4) + C_in·(C_out/4)`, which is `(17/16)·C_in·C_out`.
    pub fn weight_count(&self) -> usize {
        self.paths().iter().map(ConvPath::weight_count).sum()
    }

    /// Weights of the standard 3×3 layer with the same channel counts.
    pub fn standard_weight_count(&self) -> usize {
        9 * self.in_channels * self.out_channels
    }

    pub fn bias_count(&self) -> usize {
        self.out_channels
    }
}

/// Decomposed-to-standard weight ratio, exactly `17/144` for any valid spec.
pub fn weight_ratio(spec: &DecomposedConvSpec) -> Ratio<u64> {
    Ratio::new(spec.weight_count() as u64, spec.standard_weight_count() as u64)
}

/// Runs a decomposed convolution over `x: [N×H×W×C_in]` with explicit
/// per-path `(weight, bias)` tensors in path order.
pub fn decomposed_conv_forward<T: Scalar>(
    x: &Tensor<T>,
    spec: &DecomposedConvSpec,
    params: &[(Tensor<T>, Tensor<T>); 4],
) -> Result<Tensor<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut bank = ConvBank::<T>::decomposed("dc", spec.in_channels, spec.out_channels, &mut rng)?;
    let paths = spec.paths();
    let mut slots: Vec<&mut Param<T>> = bank.params_mut();
    for (i, (w, b)) in params.iter().enumerate() {
        w.expect_shape(&format!("path {} weight", i + 1), &paths[i].weight_shape())?;
        b.expect_shape(&format!("path {} bias", i + 1), &[paths[i].out_channels])?;
        slots[2 * i].value = w.clone();
        slots[2 * i + 1].value = b.clone();
    }
    bank.infer(x)
}
