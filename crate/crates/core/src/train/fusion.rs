//! Patch averaging, arg-max labelling and product-rule late fusion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-6;

fn check_probability_row(row: &[f64], what: &str) -> Result<()> {
    if row.is_empty() {
        return Err(Error::Validation(format!("{what}: empty probability vector")));
    }
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Validation(format!("{what}: entries must be finite and >= 0")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Validation(format!("{what}: probabilities sum to {sum}")));
    }
    Ok(())
}

/// Per-patch class probabilities of one recording, `[N patches × C classes]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub id: String,
    pub probs: Vec<Vec<f64>>,
}

impl PredictionSet {
    pub fn new(id: impl Into<String>, probs: Vec<Vec<f64>>) -> Result<Self> {
        let id = id.into();
        if let Some(first) = probs.first() {
            for (i, row) in probs.iter().enumerate() {
                if row.len() != first.len() {
                    return Err(Error::shape(format!("{id} patch {i}"), &[row.len()], &[first.len()]));
                }
                check_probability_row(row, &format!("{id} patch {i}"))?;
            }
        }
        Ok(PredictionSet { id, probs })
    }
}

/// Mean over patches: `p̄_c = (1/N) Σ_n p_c^n`.
pub fn average_patches(ps: &PredictionSet) -> Result<Vec<f64>> {
    let n = ps.probs.len();
    let first = ps
        .probs
        .first()
        .ok_or_else(|| Error::Validation(format!("{}: no patch predictions", ps.id)))?;
    let mut mean = vec![0.0; first.len()];
    for row in &ps.probs {
        for (m, &p) in mean.iter_mut().zip(row) {
            *m += p;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    Ok(mean)
}

/// Index of the largest score; ties go to the lowest index.
pub fn predict_label(scores: &[f64]) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::Validation("cannot take arg-max of an empty vector".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Validation("scores must be finite".into()));
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Averaged probabilities from `S` networks for one recording, `[S × C]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionInput {
    pub rows: Vec<Vec<f64>>,
}

impl FusionInput {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        for (s, row) in rows.iter().enumerate() {
            check_probability_row(row, &format!("network {s}"))?;
        }
        Ok(FusionInput { rows })
    }
}

/// Product rule: `p̄_c = (1/S) Π_s p̄_sc`. Scores are not renormalized.
pub fn prod_fusion(f: &FusionInput) -> Result<Vec<f64>> {
    let s = f.rows.len();
    let first = f
        .rows
        .first()
        .ok_or_else(|| Error::Validation("fusion needs at least one network".into()))?;
    let mut fused = vec![1.0; first.len()];
    for (i, row) in f.rows.iter().enumerate() {
        if row.len() != fused.len() {
            return Err(Error::shape(format!("fusion row {i}"), &[row.len()], &[fused.len()]));
        }
        if let Some(p) = row.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::Validation(format!("fusion input {p} is negative or NaN")));
        }
        for (acc, &p) in fused.iter_mut().zip(row) {
            *acc *= p;
        }
    }
    fused.iter_mut().for_each(|v| *v /= s as f64);
    Ok(fused)
}
