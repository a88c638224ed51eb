//! Mel, gammatone and log-frequency (pseudo-CQT) filterbanks over STFT power.
//!
//! All three banks are `[n_bins × fft_size/2+1]` weight matrices applied to the
//! same STFT power, so every front-end shares one framing and yields the same
//! frame count for a given clip.

use super::{stft_power, FrontendConfig, Matrix};
use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// A weight matrix plus the center frequency of each row.
#[derive(Debug, Clone)]
pub struct FilterBank {
    weights: Matrix,
    centers_hz: Vec<f64>,
    /// Half-open column range holding each row's nonzero weights.
    support: Vec<(usize, usize)>,
}

impl FilterBank {
    fn new(weights: Matrix, centers_hz: Vec<f64>, what: &str) -> Result<Self> {
        let mut support = Vec::with_capacity(weights.rows());
        for r in 0..weights.rows() {
            let row = weights.row(r);
            let first = row.iter().position(|&w| w > 0.0);
            let last = row.iter().rposition(|&w| w > 0.0);
            match (first, last) {
                (Some(a), Some(b)) => support.push((a, b + 1)),
                _ => {
                    return Err(Error::Config(format!(
                        "{what} filter {r} (center {:.2} Hz) covers no FFT bin; reduce n_bins or raise fft_size",
                        centers_hz[r]
                    )))
                }
            }
        }
        Ok(FilterBank {
            weights,
            centers_hz,
            support,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.weights
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn n_bins(&self) -> usize {
        self.weights.rows()
    }

    /// Nonzero column range `[start, end)` of row `r`.
    pub fn support(&self, r: usize) -> (usize, usize) {
        self.support[r]
    }

    /// `bank · power`, giving `[n_bins × n_frames]`.
    pub fn apply(&self, power: &Matrix) -> Result<Matrix> {
        if power.rows() != self.weights.cols() {
            return Err(Error::shape(
                "filterbank input",
                &[power.rows(), power.cols()],
                &[self.weights.cols(), power.cols()],
            ));
        }
        let n_frames = power.cols();
        let mut out = Matrix::zeros(self.weights.rows(), n_frames);
        for (b, &(lo, hi)) in self.support.iter().enumerate() {
            let w = self.weights.row(b);
            let dst = out.row_mut(b);
            for k in lo..hi {
                let wk = w[k];
                if wk == 0.0 {
                    continue;
                }
                for (d, &p) in dst.iter_mut().zip(power.row(k)) {
                    *d += wk * p;
                }
            }
        }
        Ok(out)
    }
}

fn fft_bin_hz(cfg: &FrontendConfig, sample_rate: u32) -> Vec<f64> {
    (0..cfg.n_fft_bins())
        .map(|k| k as f64 * sample_rate as f64 / cfg.fft_size as f64)
        .collect()
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters with centers equally spaced in mel between 0 Hz and Nyquist.
pub fn mel_filterbank(cfg: &FrontendConfig, sample_rate: u32) -> Result<FilterBank> {
    if cfg.n_bins == 0 {
        return Err(Error::Config("n_bins must be at least 1".into()));
    }
    let top = hz_to_mel(sample_rate as f64 / 2.0);
    let edges: Vec<f64> = (0..cfg.n_bins + 2)
        .map(|i| mel_to_hz(top * i as f64 / (cfg.n_bins + 1) as f64))
        .collect();
    let freqs = fft_bin_hz(cfg, sample_rate);
    let mut weights = Matrix::zeros(cfg.n_bins, freqs.len());
    for b in 0..cfg.n_bins {
        let (lo, c, hi) = (edges[b], edges[b + 1], edges[b + 2]);
        for (k, &f) in freqs.iter().enumerate() {
            let w = ((f - lo) / (c - lo)).min((hi - f) / (hi - c));
            if w > 0.0 {
                weights.set(b, k, w);
            }
        }
    }
    FilterBank::new(weights, edges[1..=cfg.n_bins].to_vec(), "mel")
}

/// Equivalent rectangular bandwidth in Hz, `24.7 + f / 9.265`.
pub fn erb(f: f64) -> f64 {
    24.7 + f / 9.265
}

/// ERB-rate (number of ERBs below `f`), the integral of `1 / erb`.
pub fn hz_to_erb_rate(f: f64) -> f64 {
    9.265 * (1.0 + f / (24.7 * 9.265)).ln()
}

pub fn erb_rate_to_hz(e: f64) -> f64 {
    24.7 * 9.265 * ((e / 9.265).exp() - 1.0)
}

pub const GAMMATONE_F_MIN: f64 = 40.0;

/// Squared magnitude response of 4th-order gammatone filters sampled at the
/// FFT bin frequencies; centers ERB-spaced from 40 Hz to Nyquist inclusive.
pub fn gammatone_filterbank(cfg: &FrontendConfig, sample_rate: u32) -> Result<FilterBank> {
    if cfg.n_bins == 0 {
        return Err(Error::Config("n_bins must be at least 1".into()));
    }
    let nyquist = sample_rate as f64 / 2.0;
    if nyquist <= GAMMATONE_F_MIN {
        return Err(Error::Config(format!(
            "sample rate {sample_rate} Hz leaves no band above {GAMMATONE_F_MIN} Hz"
        )));
    }
    let (e_lo, e_hi) = (hz_to_erb_rate(GAMMATONE_F_MIN), hz_to_erb_rate(nyquist));
    let centers: Vec<f64> = if cfg.n_bins == 1 {
        vec![erb_rate_to_hz((e_lo + e_hi) / 2.0)]
    } else {
        (0..cfg.n_bins)
            .map(|i| erb_rate_to_hz(e_lo + (e_hi - e_lo) * i as f64 / (cfg.n_bins - 1) as f64))
            .collect()
    };
    let freqs = fft_bin_hz(cfg, sample_rate);
    let mut weights = Matrix::zeros(cfg.n_bins, freqs.len());
    for (b, &fc) in centers.iter().enumerate() {
        let bw = 1.019 * erb(fc);
        let row = weights.row_mut(b);
        for (w, &f) in row.iter_mut().zip(&freqs) {
            let x = (f - fc) / bw;
            *w = (1.0 + x * x).powi(-4);
        }
        let peak = row.iter().cloned().fold(0.0, f64::max);
        if peak > 0.0 {
            row.iter_mut().for_each(|w| *w /= peak);
        }
    }
    FilterBank::new(weights, centers, "gammatone")
}

/// Log-frequency triangular bank: center `k` at `f_min · 2^(k/B)`, each
/// triangle spanning one bin either side on the log2 axis.
pub fn cqt_filterbank(cfg: &FrontendConfig, sample_rate: u32) -> Result<FilterBank> {
    cfg.validate_cqt(sample_rate)?;
    let per_octave = cfg.cqt_bins_per_octave as f64;
    let f_min = cfg.cqt_f_min_for(sample_rate);
    let centers: Vec<f64> = (0..cfg.n_bins)
        .map(|k| f_min * 2f64.powf(k as f64 / per_octave))
        .collect();
    let freqs = fft_bin_hz(cfg, sample_rate);
    let mut weights = Matrix::zeros(cfg.n_bins, freqs.len());
    for (b, &fc) in centers.iter().enumerate() {
        for (k, &f) in freqs.iter().enumerate().skip(1) {
            let w = 1.0 - per_octave * (f / fc).log2().abs();
            if w > 0.0 {
                weights.set(b, k, w);
            }
        }
    }
    FilterBank::new(weights, centers, "CQT")
}

/// Pseudo-CQT magnitude: the log-frequency bank applied to the shared STFT power.
pub fn cqt_spectrogram(clip: &AudioClip, cfg: &FrontendConfig) -> Result<Matrix> {
    let bank = cqt_filterbank(cfg, clip.sample_rate)?;
    bank.apply(&stft_power(clip, cfg)?)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn argmax(v: &[f64]) -> usize {
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .unwrap()
            .0
    }

    #[test]
    fn single_mel_filter_spans_band() {
        let cfg = FrontendConfig {
            n_bins: 1,
            ..FrontendConfig::default()
        };
        let bank = mel_filterbank(&cfg, 44_100).unwrap();
        let mid = mel_to_hz(hz_to_mel(22_050.0) / 2.0);
        assert!((bank.centers_hz()[0] - mid).abs() < 1e-9);
        let peak_bin = argmax(bank.matrix().row(0));
        let bin_hz = 44_100.0 / 8192.0;
        assert!((peak_bin as f64 * bin_hz - mid).abs() <= bin_hz);
        let (lo, hi) = bank.support(0);
        assert_eq!(lo, 1);
        assert!(hi >= 4096);
    }

    #[test]
    fn mel_bank_overlaps_and_increases() {
        let bank = mel_filterbank(&FrontendConfig::default(), 44_100).unwrap();
        assert_eq!(bank.matrix().shape(), (128, 4097));
        for i in 0..127 {
            let (a0, a1) = bank.support(i);
            let (b0, b1) = bank.support(i + 1);
            assert!(a0.max(b0) < a1.min(b1), "filters {i},{} disjoint", i + 1);
            assert!(bank.centers_hz()[i] < bank.centers_hz()[i + 1]);
        }
        assert!(bank.matrix().as_slice().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn too_many_mel_bins_is_a_config_error() {
        let cfg = FrontendConfig {
            fft_size: 64,
            window_size: 64,
            n_bins: 128,
            ..FrontendConfig::default()
        };
        assert!(matches!(mel_filterbank(&cfg, 44_100), Err(Error::Config(_))));
    }

    #[test]
    fn gammatone_peaks_at_center() {
        let cfg = FrontendConfig::default();
        let bank = gammatone_filterbank(&cfg, 44_100).unwrap();
        let bin_hz = 44_100.0 / 8192.0;
        for (b, &fc) in bank.centers_hz().iter().enumerate() {
            let row = bank.matrix().row(b);
            let k = argmax(row);
            assert_eq!(row[k], 1.0);
            let nearest = (fc / bin_hz).round() as usize;
            assert_eq!(k, nearest.min(4096), "row {b} center {fc}");
            if b > 0 {
                assert!(fc > bank.centers_hz()[b - 1]);
            }
        }
        assert!((bank.centers_hz()[0] - 40.0).abs() < 1e-9);
        assert!((bank.centers_hz()[127] - 22_050.0).abs() < 1e-6);
    }

    #[test]
    fn gammatone_bandwidth_follows_erb() {
        // half-power points of |1 + jx|^-8 sit at x = sqrt(2^(1/4) - 1)
        let fc = 1000.0;
        let b = 1.019 * erb(fc);
        let x = (2f64.powf(0.25) - 1.0).sqrt();
        let resp = |f: f64| (1.0 + ((f - fc) / b).powi(2)).powi(-4);
        assert!((resp(fc + x * b) - 0.5).abs() < 1e-12);
        assert!((hz_to_erb_rate(erb_rate_to_hz(7.3)) - 7.3).abs() < 1e-12);
    }

    #[test]
    fn gammatone_halved_bank_interleaves() {
        let fine = gammatone_filterbank(&FrontendConfig::default(), 44_100).unwrap();
        let coarse_cfg = FrontendConfig {
            n_bins: 64,
            ..FrontendConfig::default()
        };
        let coarse = gammatone_filterbank(&coarse_cfg, 44_100).unwrap();
        let f = fine.centers_hz();
        for w in coarse.centers_hz().windows(2) {
            let inside = f.iter().filter(|&&c| c > w[0] && c < w[1]).count();
            assert!(inside >= 1, "no fine center between {} and {}", w[0], w[1]);
        }
    }

    fn tone(freq: f64, sr: u32, len: usize) -> AudioClip {
        let samples = (0..len)
            .map(|n| (0.5 * (2.0 * PI * freq * n as f64 / sr as f64).sin()) as f32)
            .collect();
        AudioClip::new("tone", samples, sr).unwrap()
    }

    #[test]
    fn cqt_centers_are_geometric() {
        let bank = cqt_filterbank(&FrontendConfig::default(), 44_100).unwrap();
        let ratio = 2f64.powf(1.0 / 16.0);
        for w in bank.centers_hz().windows(2) {
            assert!((w[1] / w[0] - ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn cqt_tone_sweep_lands_on_its_bin() {
        // Bins whose triangles are several FFT bins wide resolve their own tone.
        let cfg = FrontendConfig {
            fft_size: 4096,
            window_size: 4096,
            hop_size: 1024,
            n_bins: 48,
            cqt_bins_per_octave: 12,
            ..FrontendConfig::default()
        };
        let sr = 16_000;
        let bank = cqt_filterbank(&cfg, sr).unwrap();
        let centers = bank.centers_hz().to_vec();
        for k in 12..36 {
            let clip = tone(centers[k], sr, 4096);
            let spec = cqt_spectrogram(&clip, &cfg).unwrap();
            let col = spec.column(0);
            assert_eq!(argmax(&col), k, "tone at bin {k}");
            let doubled = cqt_spectrogram(&tone(2.0 * centers[k], sr, 4096), &cfg).unwrap();
            assert_eq!(argmax(&doubled.column(0)), k + 12, "octave of bin {k}");
        }
    }

    #[test]
    fn banks_are_linear() {
        let cfg = FrontendConfig::default();
        let bank = gammatone_filterbank(&cfg, 44_100).unwrap();
        let power = Matrix::from_vec(4097, 2, (0..8194).map(|i| (i % 17) as f64).collect());
        let a = bank.apply(&power).unwrap();
        let b = bank.apply(&power.map(|v| 3.5 * v)).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((3.5 * x - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }
}
