//! Run configuration shared by the command-line tools.
//!
//! Files are TOML, or JSON when the extension is `.json`. Unknown keys are
//! rejected at every level. Relative paths resolve against the directory of
//! the file they were read from.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio::DEFAULT_LABELS;
use crate::augment::{MixupConfig, SpecAugmentConfig};
use crate::cnn7::Variant;
use crate::error::{Error, Result};
use crate::frontend::{FrontendConfig, FrontendKind};
use crate::train::TrainingConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub manifest: PathBuf,
    /// Feature caches go to `<features>/<branch>/`.
    pub features: PathBuf,
    /// Training runs go to `<runs>/<branch>/<config hash>/`.
    pub runs: PathBuf,
    pub reports: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            manifest: "manifest.tsv".into(),
            features: "features".into(),
            runs: "runs".into(),
            reports: "reports".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatchConfig {
    pub frames: usize,
    pub overlap: f64,
}

impl Default for PatchConfig {
    fn default() -> Self {
        PatchConfig {
            frames: 128,
            overlap: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub variant: Variant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { variant: Variant::Crdc }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub mixup: MixupConfig,
    pub spec_augment: SpecAugmentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub labels: Vec<String>,
    pub paths: PathsConfig,
    pub frontend: FrontendConfig,
    pub patches: PatchConfig,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub augment: AugmentConfig,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            labels: DEFAULT_LABELS.iter().map(|s| s.to_string()).collect(),
            paths: PathsConfig::default(),
            frontend: FrontendConfig::default(),
            patches: PatchConfig::default(),
            model: ModelConfig::default(),
            training: TrainingConfig::default(),
            augment: AugmentConfig::default(),
            base_dir: PathBuf::new(),
        }
    }
}

/// The settings that determine a branch's features and trained weights.
#[derive(Serialize)]
struct HashView<'a> {
    labels: &'a [String],
    frontend: &'a FrontendConfig,
    patches: &'a PatchConfig,
    model: &'a ModelConfig,
    training: &'a TrainingConfig,
    augment: &'a AugmentConfig,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg = if is_json {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
        .map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.is_empty() {
            return Err(Error::Config("labels must not be empty".into()));
        }
        for (i, l) in self.labels.iter().enumerate() {
            if self.labels[..i].contains(l) {
                return Err(Error::Config(format!("duplicate label {l:?}")));
            }
        }
        self.frontend.validate()?;
        if self.patches.frames == 0 || !(0.0..1.0).contains(&self.patches.overlap) {
            return Err(Error::Config(format!(
                "patches need frames >= 1 and overlap in [0, 1), got {} and {}",
                self.patches.frames, self.patches.overlap
            )));
        }
        self.training.validate()?;
        self.augment.mixup.validate()?;
        self.augment
            .spec_augment
            .validate_for(self.frontend.n_bins, self.patches.frames)
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = dir.into();
        self
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.resolve(&self.paths.manifest)
    }

    pub fn features_dir(&self, kind: FrontendKind) -> PathBuf {
        self.resolve(&self.paths.features).join(kind.as_str())
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.resolve(&self.paths.reports)
    }

    /// Front-end settings for one branch.
    pub fn frontend_for(&self, kind: FrontendKind) -> FrontendConfig {
        self.frontend.clone().with_kind(kind)
    }

    /// The configuration as it applies to one branch.
    pub fn for_branch(&self, kind: FrontendKind) -> RunConfig {
        let mut cfg = self.clone();
        cfg.frontend.kind = kind;
        cfg
    }

    /// First 16 hex digits of the SHA-256 of the settings that affect
    /// results. Paths are excluded.
    pub fn hash(&self) -> String {
        let view = HashView {
            labels: &self.labels,
            frontend: &self.frontend,
            patches: &self.patches,
            model: &self.model,
            training: &self.training,
            augment: &self.augment,
        };
        let bytes = serde_json::to_vec(&view).expect("config serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }

    pub fn run_dir(&self, kind: FrontendKind) -> PathBuf {
        let branch = self.for_branch(kind);
        self.resolve(&self.paths.runs)
            .join(kind.as_str())
            .join(branch.hash())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }
}
