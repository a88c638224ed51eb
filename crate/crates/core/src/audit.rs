//! Trainable-parameter ledger and byte-size budget at 32 bits per parameter.
//!
//! Batch-norm γ/β are trainable but some budget conventions leave them out,
//! so every report carries both a BN-inclusive and a BN-exclusive total.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cnn7::{DecomposedConvSpec, ModelSpec, Variant};
use crate::error::Result;
use crate::nn::LayerKind;

pub const BYTES_PER_PARAM: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRow {
    pub name: String,
    pub kind: String,
    pub output_shape: Vec<usize>,
    pub weights: usize,
    pub biases: usize,
    pub bn_params: usize,
}

impl LayerRow {
    pub fn total(&self) -> usize {
        self.weights + self.biases + self.bn_params
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BnConvention {
    /// Count batch-norm γ/β.
    Inclusive,
    /// Count only convolution and dense weights and biases.
    #[default]
    Exclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub params: usize,
    pub kilobytes: f64,
}

impl Totals {
    fn of(params: usize) -> Self {
        Totals {
            params,
            kilobytes: kilobytes(params),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub variant: Variant,
    pub rows: Vec<LayerRow>,
    /// Rows aggregated per network block, with the block's output shape.
    pub blocks: Vec<LayerRow>,
    pub with_bn: Totals,
    pub without_bn: Totals,
}

/// `params × 4 / 1024`.
pub fn kilobytes(params: usize) -> f64 {
    (params * BYTES_PER_PARAM) as f64 / 1024.0
}

impl ComplexityReport {
    pub fn totals(&self, convention: BnConvention) -> &Totals {
        match convention {
            BnConvention::Inclusive => &self.with_bn,
            BnConvention::Exclusive => &self.without_bn,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned table with one row per network block plus a size column.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "model: {}", self.variant);
        let _ = writeln!(
            out,
            "{:<10} {:>14} {:>10} {:>8} {:>8} {:>10}",
            "block", "output", "weights", "biases", "bn", "KB"
        );
        for b in &self.blocks {
            let shape = b.output_shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x");
            let _ = writeln!(
                out,
                "{:<10} {:>14} {:>10} {:>8} {:>8} {:>10.2}",
                b.name,
                shape,
                b.weights,
                b.biases,
                b.bn_params,
                kilobytes(b.total())
            );
        }
        let _ = writeln!(
            out,
            "total (with BN γ/β):    {:>8} params {:>10.2} KB",
            self.with_bn.params, self.with_bn.kilobytes
        );
        let _ = writeln!(
            out,
            "total (without BN):     {:>8} params {:>10.2} KB",
            self.without_bn.params, self.without_bn.kilobytes
        );
        let _ = writeln!(
            out,
            "note: 4 bytes per parameter, 1 KB = 1024 bytes; the published baseline figure \"1,129 MB\" is read as ≈1.13 MB."
        );
        out
    }
}

/// Counts trainable parameters layer by layer.
pub fn count_params(spec: &ModelSpec) -> Result<ComplexityReport> {
    let shapes = spec.shape_ledger()?;
    let mut rows = Vec::new();
    for (layer, shape) in spec.layers.iter().zip(shapes) {
        let (kind, weights, biases, bn_params) = match layer.kind {
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
            } => (
                "Conv2d",
                kernel[0] * kernel[1] * in_channels * out_channels,
                out_channels,
                0,
            ),
            LayerKind::DecomposedConv2d {
                in_channels,
                out_channels,
            } => {
                let d = DecomposedConvSpec::new(in_channels, out_channels)?;
                ("DecomposedConv2d", d.weight_count(), d.bias_count(), 0)
            }
            LayerKind::BatchNorm { channels } => ("BatchNorm", 0, 0, 2 * channels),
            LayerKind::FullyConnected {
                in_features,
                out_features,
            } => ("FullyConnected", in_features * out_features, out_features, 0),
            _ => continue,
        };
        rows.push(LayerRow {
            name: layer.name.clone(),
            kind: kind.to_string(),
            output_shape: shape,
            weights,
            biases,
            bn_params,
        });
    }
    let block_shapes = spec.block_outputs()?;
    let mut blocks: Vec<LayerRow> = Vec::new();
    for row in &rows {
        let block = row.name.split('.').next().unwrap_or(&row.name);
        match blocks.last_mut() {
            Some(b) if b.name == block => {
                b.weights += row.weights;
                b.biases += row.biases;
                b.bn_params += row.bn_params;
            }
            _ => blocks.push(LayerRow {
                name: block.to_string(),
                kind: "Block".to_string(),
                output_shape: block_shapes.get(blocks.len()).cloned().unwrap_or_default(),
                weights: row.weights,
                biases: row.biases,
                bn_params: row.bn_params,
            }),
        }
    }
    let with_bn: usize = rows.iter().map(LayerRow::total).sum();
    let bn: usize = rows.iter().map(|r| r.bn_params).sum();
    Ok(ComplexityReport {
        variant: spec.variant,
        rows,
        blocks,
        with_bn: Totals::of(with_bn),
        without_bn: Totals::of(with_bn - bn),
    })
}

/// Summed size in KB of an ensemble of models.
pub fn ensemble_size(reports: &[ComplexityReport], convention: BnConvention) -> f64 {
    reports.iter().map(|r| r.totals(convention).kilobytes).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn7::build_cnn7;

    #[test]
    fn conv_row_arithmetic() {
        let report = count_params(&build_cnn7(Variant::Baseline, 10).unwrap()).unwrap();
        let b2 = report.rows.iter().find(|r| r.name == "b2.conv").unwrap();
        assert_eq!((b2.weights, b2.biases), (9216, 32));
    }

    #[test]
    fn single_report_ensemble_is_identity() {
        let r = count_params(&build_cnn7(Variant::Crdc, 10).unwrap()).unwrap();
        for c in [BnConvention::Inclusive, BnConvention::Exclusive] {
            assert_eq!(ensemble_size(std::slice::from_ref(&r), c), r.totals(c).kilobytes);
        }
    }

    #[test]
    fn text_table_has_block_rows() {
        let r = count_params(&build_cnn7(Variant::Baseline, 10).unwrap()).unwrap();
        let text = r.to_text();
        assert!(text.lines().any(|l| l.starts_with("b5") && l.contains("16x16x128")));
        assert!(text.lines().any(|l| l.starts_with("b6") && l.contains(" 128 ")));
        assert!(text.lines().any(|l| l.starts_with("fc")));
    }
}
