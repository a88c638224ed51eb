use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{FrontendConfig, Matrix};
use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Number of full frames that fit in `len` samples.
pub fn frame_count(len: usize, window_size: usize, hop_size: usize) -> Option<usize> {
    (len >= window_size).then(|| (len - window_size) / hop_size + 1)
}

/// Squared-magnitude STFT, `[fft_size/2 + 1 × n_frames]`.
///
/// Each frame is Hann-windowed over `window_size` samples and zero-padded at
/// the end to `fft_size` before the transform.
pub fn stft_power(clip: &AudioClip, cfg: &FrontendConfig) -> Result<Matrix> {
    stft_power_samples(&clip.samples, cfg)
}

pub fn stft_power_samples(samples: &[f32], cfg: &FrontendConfig) -> Result<Matrix> {
    if cfg.window_size > cfg.fft_size || cfg.hop_size == 0 || cfg.window_size == 0 {
        return Err(Error::Config("invalid STFT framing".into()));
    }
    let n_frames = frame_count(samples.len(), cfg.window_size, cfg.hop_size).ok_or_else(|| {
        Error::InputTooShort(format!(
            "{} samples is shorter than one {}-sample window",
            samples.len(),
            cfg.window_size
        ))
    })?;
    let n_bins = cfg.n_fft_bins();
    let window = hann_window(cfg.window_size);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.fft_size);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut out = Matrix::zeros(n_bins, n_frames);
    for t in 0..n_frames {
        let start = t * cfg.hop_size;
        let frame = &samples[start..start + cfg.window_size];
        for (dst, (&x, &w)) in buf.iter_mut().zip(frame.iter().zip(&window)) {
            *dst = Complex::new(x as f64 * w, 0.0);
        }
        buf[cfg.window_size..].fill(Complex::new(0.0, 0.0));
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (k, z) in buf.iter().take(n_bins).enumerate() {
            out.set(k, t, z.norm_sqr());
        }
    }
    Ok(out)
}
