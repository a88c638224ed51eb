//! Helpers shared by the subcommands: exit codes, output files, metadata.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use ascnet::audio::{load_manifest, ManifestEntry};
use ascnet::config::RunConfig;
use ascnet::frontend::{read_cached, FrontendKind, Spectrogram};
use ascnet::Error;
use serde_json::json;

/// Validation and configuration problems exit 1, I/O 2, numerical 3.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return err.exit_code() as u8;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))
}

pub fn load_entries(cfg: &RunConfig, manifest: &Path) -> Result<Vec<ManifestEntry>> {
    Ok(load_manifest(manifest, &cfg.labels)?)
}

/// Audio path of a manifest entry, resolved against the manifest's directory.
pub fn audio_path(manifest: &Path, entry: &ManifestEntry) -> PathBuf {
    match manifest.parent() {
        Some(dir) if entry.path.is_relative() => dir.join(&entry.path),
        _ => entry.path.clone(),
    }
}

/// Cached features of one recording, or a configuration error naming the extract step.
pub fn cached_features(
    cfg: &RunConfig,
    config_path: &Path,
    kind: FrontendKind,
    id: &str,
) -> Result<Spectrogram> {
    let dir = cfg.features_dir(kind);
    read_cached(&dir, id, &cfg.frontend_for(kind))?.ok_or_else(|| {
        Error::Config(format!(
            "no up-to-date {kind} features for {id} in {}; run `ascnet extract --config {} --frontend {kind}` first",
            dir.display(),
            config_path.display()
        ))
        .into()
    })
}

/// Wall-clock facts about a run, kept apart from the reproducible outputs.
pub struct Metadata {
    command: String,
    started: SystemTime,
    clock: Instant,
}

impl Metadata {
    pub fn start(command: &str) -> Self {
        Metadata {
            command: command.to_string(),
            started: SystemTime::now(),
            clock: Instant::now(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let secs = |t: SystemTime| t.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let meta = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "started_unix": secs(self.started),
            "finished_unix": secs(SystemTime::now()),
            "elapsed_secs": self.clock.elapsed().as_secs_f64(),
            "threads": rayon::current_num_threads(),
        });
        write_file(&dir.join("metadata.json"), serde_json::to_string_pretty(&meta)? + "\n")
    }
}
