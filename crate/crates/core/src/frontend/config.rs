use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which filterbank turns STFT power into the spectrogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontendKind {
    Mel,
    Gam,
    Cqt,
}

impl FrontendKind {
    pub const ALL: [FrontendKind; 3] = [FrontendKind::Mel, FrontendKind::Gam, FrontendKind::Cqt];

    pub fn as_str(self) -> &'static str {
        match self {
            FrontendKind::Mel => "mel",
            FrontendKind::Gam => "gam",
            FrontendKind::Cqt => "cqt",
        }
    }

    pub(crate) fn tag(self) -> u32 {
        match self {
            FrontendKind::Mel => 0,
            FrontendKind::Gam => 1,
            FrontendKind::Cqt => 2,
        }
    }

    pub(crate) fn from_tag(tag: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }
}

impl fmt::Display for FrontendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FrontendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mel" => Ok(FrontendKind::Mel),
            "gam" | "gammatone" => Ok(FrontendKind::Gam),
            "cqt" => Ok(FrontendKind::Cqt),
            other => Err(Error::Config(format!(
                "unknown front-end kind {other:?} (expected mel, gam or cqt)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontendConfig {
    pub kind: FrontendKind,
    pub expected_sample_rate: u32,
    pub fft_size: usize,
    pub window_size: usize,
    pub hop_size: usize,
    pub n_bins: usize,
    pub log_floor: f64,
    pub delta_width: usize,
    pub cqt_bins_per_octave: usize,
    /// Lowest CQT center in Hz; `None` places the top bin edge at Nyquist.
    pub cqt_f_min: Option<f64>,
    /// Per-channel zero-mean, unit-variance scaling of the stacked spectrogram.
    pub standardize: bool,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        FrontendConfig {
            kind: FrontendKind::Mel,
            expected_sample_rate: 44_100,
            fft_size: 8192,
            window_size: 4096,
            hop_size: 620,
            n_bins: 128,
            log_floor: 1e-10,
            delta_width: 9,
            cqt_bins_per_octave: 16,
            cqt_f_min: None,
            standardize: true,
        }
    }
}

impl FrontendConfig {
    pub fn with_kind(mut self, kind: FrontendKind) -> Self {
        self.kind = kind;
        self
    }

    /// Number of one-sided FFT bins, `fft_size / 2 + 1`.
    pub fn n_fft_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn cqt_f_min_for(&self, sample_rate: u32) -> f64 {
        self.cqt_f_min.unwrap_or_else(|| {
            sample_rate as f64 / 2.0
                / 2f64.powf(self.n_bins as f64 / self.cqt_bins_per_octave as f64)
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.fft_size == 0 || self.window_size == 0 {
            return Err(Error::Config("fft_size and window_size must be positive".into()));
        }
        if self.window_size > self.fft_size {
            return Err(Error::Config(format!(
                "window_size {} exceeds fft_size {}",
                self.window_size, self.fft_size
            )));
        }
        if self.hop_size == 0 {
            return Err(Error::Config("hop_size must be at least 1".into()));
        }
        if self.n_bins == 0 {
            return Err(Error::Config("n_bins must be at least 1".into()));
        }
        if self.delta_width < 3 || self.delta_width.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "delta_width must be odd and >= 3, got {}",
                self.delta_width
            )));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return Err(Error::Config("log_floor must be a small positive number".into()));
        }
        if self.expected_sample_rate == 0 {
            return Err(Error::Config("expected_sample_rate must be positive".into()));
        }
        if self.kind == FrontendKind::Cqt {
            self.validate_cqt(self.expected_sample_rate)?;
        }
        Ok(())
    }

    pub(crate) fn validate_cqt(&self, sample_rate: u32) -> Result<()> {
        if self.cqt_bins_per_octave == 0 {
            return Err(Error::Config("cqt_bins_per_octave must be positive".into()));
        }
        let f_min = self.cqt_f_min_for(sample_rate);
        let top = f_min * 2f64.powf(self.n_bins as f64 / self.cqt_bins_per_octave as f64);
        let nyquist = sample_rate as f64 / 2.0;
        if !(f_min > 0.0) || top > nyquist * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "CQT geometry f_min={f_min} Hz with {} bins at {} per octave reaches {top} Hz, above Nyquist {nyquist} Hz",
                self.n_bins, self.cqt_bins_per_octave
            )));
        }
        Ok(())
    }
}
