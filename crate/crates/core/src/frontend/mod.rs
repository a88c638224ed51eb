//! Spectrogram front-ends: STFT power through a mel, gammatone or
//! log-frequency bank, log compression, delta stacking, standardization and
//! patching.

mod cache;
mod config;
mod features;
mod filterbank;
mod matrix;
mod stft;

pub use cache::{cache_paths, decode_spectrogram, encode_spectrogram, read_cached, write_cached};
pub use config::{FrontendConfig, FrontendKind};
pub use features::{
    add_deltas, delta, log_compress, patch_stride, split_patches, Patch, Spectrogram, N_CHANNELS,
};
pub use filterbank::{
    cqt_filterbank, cqt_spectrogram, erb, erb_rate_to_hz, gammatone_filterbank, hz_to_erb_rate,
    hz_to_mel, mel_filterbank, mel_to_hz, FilterBank, GAMMATONE_F_MIN,
};
pub use matrix::Matrix;
pub use stft::{frame_count, hann_window, stft_power, stft_power_samples};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// A configured front-end with its filterbank built once and shared read-only.
#[derive(Debug, Clone)]
pub struct Frontend {
    cfg: FrontendConfig,
    bank: FilterBank,
}

impl Frontend {
    pub fn new(cfg: FrontendConfig) -> Result<Self> {
        cfg.validate()?;
        let sr = cfg.expected_sample_rate;
        let bank = match cfg.kind {
            FrontendKind::Mel => mel_filterbank(&cfg, sr)?,
            FrontendKind::Gam => gammatone_filterbank(&cfg, sr)?,
            FrontendKind::Cqt => cqt_filterbank(&cfg, sr)?,
        };
        Ok(Frontend { cfg, bank })
    }

    pub fn config(&self) -> &FrontendConfig {
        &self.cfg
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    /// Filterbank energies before log compression, `[n_bins × n_frames]`.
    pub fn band_power(&self, clip: &AudioClip) -> Result<Matrix> {
        if clip.sample_rate != self.cfg.expected_sample_rate {
            return Err(Error::Validation(format!(
                "{}: sample rate {} Hz does not match the configured {} Hz (no resampling is performed)",
                clip.id, clip.sample_rate, self.cfg.expected_sample_rate
            )));
        }
        self.bank.apply(&stft_power(clip, &self.cfg)?)
    }

    /// Full feature pipeline: band power, dB compression, deltas, and
    /// (by default) per-channel standardization.
    pub fn process(&self, clip: &AudioClip) -> Result<Spectrogram> {
        let db = log_compress(&self.band_power(clip)?, self.cfg.log_floor)?;
        let mut spec = add_deltas(&db, self.cfg.delta_width, self.cfg.kind)?;
        if self.cfg.standardize {
            spec.standardize();
        }
        if spec.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("{}: non-finite feature value", clip.id)));
        }
        Ok(spec)
    }
}
