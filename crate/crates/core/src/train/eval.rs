//! Recording-level evaluation: patch, predict, average, fuse, label.

use rayon::prelude::*;

use super::fusion::{average_patches, predict_label, prod_fusion, FusionInput, PredictionSet};
use super::report::{EvalReport, Outcome};
use super::trainer::predict_patches;
use crate::error::{Error, Result};
use crate::frontend::{split_patches, Spectrogram};
use crate::nn::Network;

/// Features of one evaluation recording, one spectrogram per branch.
#[derive(Debug, Clone)]
pub struct RecordingFeatures {
    pub id: String,
    pub device: String,
    pub label: usize,
    pub branches: Vec<Spectrogram>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub patch_frames: usize,
    pub overlap: f64,
    pub fuse: bool,
    pub batch_size: usize,
}

/// A trained network paired with the branch name it serves.
pub struct Branch<'a> {
    pub name: String,
    pub model: &'a Network<f32>,
}

/// Averaged class probabilities of one recording under one model.
pub fn recording_probabilities(
    model: &Network<f32>,
    spec: &Spectrogram,
    id: &str,
    opts: &EvalOptions,
) -> Result<Vec<f64>> {
    let patches = split_patches(spec, id, opts.patch_frames, opts.overlap)?;
    let inputs: Vec<&[f32]> = patches.iter().map(|p| p.values.as_slice()).collect();
    let probs = predict_patches(model, &inputs, opts.batch_size)?;
    average_patches(&PredictionSet::new(id, probs)?)
}

/// Labels every recording and aggregates the results.
///
/// Without fusion exactly one branch is expected; with fusion at least two.
/// Recordings are processed in parallel and reported in input order.
pub fn evaluate(
    branches: &[Branch<'_>],
    recordings: &[RecordingFeatures],
    labels: &[String],
    opts: &EvalOptions,
) -> Result<EvalReport> {
    match (opts.fuse, branches.len()) {
        (false, 1) => {}
        (true, n) if n >= 2 => {}
        (false, n) => {
            return Err(Error::Config(format!(
                "evaluation without fusion takes one branch, got {n}"
            )))
        }
        (true, n) => return Err(Error::Config(format!("fusion needs at least 2 branches, got {n}"))),
    }
    let outcomes = recordings
        .par_iter()
        .map(|rec| {
            if rec.branches.len() != branches.len() {
                return Err(Error::Config(format!(
                    "{}: {} feature sets for {} branches",
                    rec.id,
                    rec.branches.len(),
                    branches.len()
                )));
            }
            let rows = branches
                .iter()
                .zip(&rec.branches)
                .map(|(b, spec)| recording_probabilities(b.model, spec, &rec.id, opts))
                .collect::<Result<Vec<_>>>()?;
            let scores = if opts.fuse {
                prod_fusion(&FusionInput::new(rows)?)?
            } else {
                rows.into_iter().next().expect("one branch")
            };
            Ok(Outcome {
                id: rec.id.clone(),
                device: rec.device.clone(),
                truth: rec.label,
                predicted: predict_label(&scores)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = branches.iter().map(|b| b.name.clone()).collect();
    EvalReport::from_outcomes(labels, &names, opts.fuse, outcomes)
}
