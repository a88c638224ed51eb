//! Mixup and time/frequency masking on patch batches.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixupConfig {
    pub enabled: bool,
    /// Both shape parameters of the Beta distribution λ is drawn from.
    pub alpha: f64,
}

impl Default for MixupConfig {
    fn default() -> Self {
        MixupConfig {
            enabled: true,
            alpha: 0.4,
        }
    }
}

impl MixupConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("mixup alpha must be > 0, got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn sample_lambda(&self, rng: &mut impl Rng) -> f64 {
        Beta::new(self.alpha, self.alpha)
            .expect("alpha validated")
            .sample(rng)
            .clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpecAugmentConfig {
    pub enabled: bool,
    pub n_time_masks: usize,
    pub max_time_width: usize,
    pub n_freq_masks: usize,
    pub max_freq_width: usize,
    pub fill: f32,
}

impl Default for SpecAugmentConfig {
    fn default() -> Self {
        SpecAugmentConfig {
            enabled: true,
            n_time_masks: 2,
            max_time_width: 20,
            n_freq_masks: 2,
            max_freq_width: 20,
            fill: 0.0,
        }
    }
}

impl SpecAugmentConfig {
    /// Mask widths must be narrower than the patch they cut into.
    pub fn validate_for(&self, n_bins: usize, frames: usize) -> Result<()> {
        if self.enabled && (self.max_time_width >= frames || self.max_freq_width >= n_bins) {
            return Err(Error::Config(format!(
                "mask widths (time {}, freq {}) must be below the patch size {n_bins}×{frames}",
                self.max_time_width, self.max_freq_width
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Time,
    Frequency,
}

/// A masked band `[start, start + width)` along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Band {
    pub axis: Axis,
    pub start: usize,
    pub width: usize,
}

/// Convex combination of two input batches and their label distributions.
pub fn mixup_batch<T: Scalar>(
    x1: &Tensor<T>,
    x2: &Tensor<T>,
    y1: &Tensor<T>,
    y2: &Tensor<T>,
    lambda: f64,
) -> Result<(Tensor<T>, Tensor<T>)> {
    x2.expect_shape("mixup partner inputs", x1.shape())?;
    y2.expect_shape("mixup partner labels", y1.shape())?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Validation(format!("mixup λ must be in [0, 1], got {lambda}")));
    }
    let (a, b) = (T::lit(lambda), T::lit(1.0 - lambda));
    let mix = |p: &Tensor<T>, q: &Tensor<T>| {
        let data = p.data().iter().zip(q.data()).map(|(&u, &v)| a * u + b * v).collect();
        Tensor::from_vec(p.shape(), data)
    };
    Ok((mix(x1, x2)?, mix(y1, y2)?))
}

/// Masks random time and frequency bands of one `[bins × frames × channels]`
/// patch in place, returning the drawn bands.
pub fn spec_augment(
    values: &mut [f32],
    shape: [usize; 3],
    cfg: &SpecAugmentConfig,
    rng: &mut impl Rng,
) -> Vec<Band> {
    let [n_bins, frames, channels] = shape;
    debug_assert_eq!(values.len(), n_bins * frames * channels);
    let mut bands = Vec::with_capacity(cfg.n_time_masks + cfg.n_freq_masks);
    draw_bands(&mut bands, Axis::Time, cfg.n_time_masks, cfg.max_time_width, frames, rng);
    draw_bands(&mut bands, Axis::Frequency, cfg.n_freq_masks, cfg.max_freq_width, n_bins, rng);
    for band in &bands {
        match band.axis {
            Axis::Time => {
                for b in 0..n_bins {
                    let row = (b * frames + band.start) * channels;
                    values[row..row + band.width * channels].fill(cfg.fill);
                }
            }
            Axis::Frequency => {
                let start = band.start * frames * channels;
                values[start..start + band.width * frames * channels].fill(cfg.fill);
            }
        }
    }
    bands
}

fn draw_bands(
    bands: &mut Vec<Band>,
    axis: Axis,
    count: usize,
    max_width: usize,
    extent: usize,
    rng: &mut impl Rng,
) {
    for _ in 0..count {
        let width = rng.random_range(0..=max_width.min(extent));
        let start = rng.random_range(0..=extent - width);
        bands.push(Band { axis, start, width });
    }
}
