use serde::{Deserialize, Serialize};

use super::{FrontendKind, Matrix};
use crate::error::{Error, Result};

/// `10·log10(power + floor)`.
pub fn log_compress(power: &Matrix, log_floor: f64) -> Result<Matrix> {
    if let Some(i) = power.as_slice().iter().position(|&p| !(p >= 0.0)) {
        return Err(Error::Validation(format!(
            "power entry {i} is {} (must be finite and >= 0)",
            power.as_slice()[i]
        )));
    }
    Ok(power.map(|p| 10.0 * (p + log_floor).log10()))
}

/// Time-frequency feature with log-energy, delta and delta-delta channels,
/// stored `[n_bins × n_frames × 3]` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    pub kind: FrontendKind,
    pub n_bins: usize,
    pub n_frames: usize,
    pub values: Vec<f32>,
}

pub const N_CHANNELS: usize = 3;

impl Spectrogram {
    pub fn new(kind: FrontendKind, n_bins: usize, n_frames: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != n_bins * n_frames * N_CHANNELS {
            return Err(Error::shape(
                "spectrogram values",
                &[values.len()],
                &[n_bins * n_frames * N_CHANNELS],
            ));
        }
        Ok(Spectrogram {
            kind,
            n_bins,
            n_frames,
            values,
        })
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.n_bins, self.n_frames, N_CHANNELS]
    }

    pub fn get(&self, bin: usize, frame: usize, channel: usize) -> f32 {
        self.values[(bin * self.n_frames + frame) * N_CHANNELS + channel]
    }

    /// Subtracts each channel's mean and divides by its standard deviation.
    pub fn standardize(&mut self) {
        for c in 0..N_CHANNELS {
            let n = (self.n_bins * self.n_frames) as f64;
            let vals = self.values.iter().skip(c).step_by(N_CHANNELS);
            let mean = vals.clone().map(|&v| v as f64).sum::<f64>() / n;
            let var = vals.map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
            let scale = if var > 1e-12 { 1.0 / var.sqrt() } else { 1.0 };
            for v in self.values.iter_mut().skip(c).step_by(N_CHANNELS) {
                *v = ((*v as f64 - mean) * scale) as f32;
            }
        }
    }
}

/// Linear-regression slope over a centered window of `width` frames, with
/// edge frames replicated.
pub fn delta(rows: &Matrix, width: usize) -> Matrix {
    let half = (width / 2) as isize;
    let denom = 2.0 * (1..=half).map(|n| (n * n) as f64).sum::<f64>();
    let n_frames = rows.cols() as isize;
    let mut out = Matrix::zeros(rows.rows(), rows.cols());
    for r in 0..rows.rows() {
        let src = rows.row(r);
        let at = |t: isize| src[t.clamp(0, n_frames - 1) as usize];
        let dst = out.row_mut(r);
        for t in 0..n_frames {
            let num: f64 = (1..=half).map(|n| n as f64 * (at(t + n) - at(t - n))).sum();
            dst[t as usize] = num / denom;
        }
    }
    out
}

/// Stacks `[x, Δx, ΔΔx]` into a three-channel spectrogram.
pub fn add_deltas(spec2d: &Matrix, delta_width: usize, kind: FrontendKind) -> Result<Spectrogram> {
    if delta_width < 3 || delta_width.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "delta_width must be odd and >= 3, got {delta_width}"
        )));
    }
    if spec2d.cols() < delta_width {
        return Err(Error::InputTooShort(format!(
            "{} frames is fewer than the delta width {delta_width}",
            spec2d.cols()
        )));
    }
    let d1 = delta(spec2d, delta_width);
    let d2 = delta(&d1, delta_width);
    let (n_bins, n_frames) = spec2d.shape();
    let mut values = Vec::with_capacity(n_bins * n_frames * N_CHANNELS);
    for b in 0..n_bins {
        for t in 0..n_frames {
            values.push(spec2d.get(b, t) as f32);
            values.push(d1.get(b, t) as f32);
            values.push(d2.get(b, t) as f32);
        }
    }
    Spectrogram::new(kind, n_bins, n_frames, values)
}

/// Fixed-width time crop of a spectrogram, `[n_bins × frames × 3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub values: Vec<f32>,
    pub n_bins: usize,
    pub frames: usize,
    pub source_id: String,
    pub index: usize,
}

impl Patch {
    pub fn shape(&self) -> [usize; 3] {
        [self.n_bins, self.frames, N_CHANNELS]
    }
}

/// Stride between patch starts for a given overlap fraction.
pub fn patch_stride(patch_frames: usize, overlap: f64) -> usize {
    ((patch_frames as f64 * (1.0 - overlap)).round() as usize).max(1)
}

/// Cuts `patch_frames`-wide patches at stride `patch_frames·(1 − overlap)`;
/// trailing frames that do not fill a patch are dropped.
pub fn split_patches(
    spec: &Spectrogram,
    source_id: &str,
    patch_frames: usize,
    overlap: f64,
) -> Result<Vec<Patch>> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Config(format!("overlap must be in [0, 1), got {overlap}")));
    }
    if patch_frames == 0 {
        return Err(Error::Config("patch width must be positive".into()));
    }
    if spec.n_frames < patch_frames {
        return Err(Error::InputTooShort(format!(
            "spectrogram has {} frames, fewer than one {patch_frames}-frame patch",
            spec.n_frames
        )));
    }
    let stride = patch_stride(patch_frames, overlap);
    let count = (spec.n_frames - patch_frames) / stride + 1;
    let row_len = patch_frames * N_CHANNELS;
    Ok((0..count)
        .map(|i| {
            let start = i * stride;
            let mut values = Vec::with_capacity(spec.n_bins * row_len);
            for b in 0..spec.n_bins {
                let off = (b * spec.n_frames + start) * N_CHANNELS;
                values.extend_from_slice(&spec.values[off..off + row_len]);
            }
            Patch {
                values,
                n_bins: spec.n_bins,
                frames: patch_frames,
                source_id: source_id.to_string(),
                index: i,
            }
        })
        .collect())
}
