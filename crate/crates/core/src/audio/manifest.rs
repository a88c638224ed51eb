//! Delimited-text dataset manifests: one row per recording with filename, label, device and split columns.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ten urban scene classes used as the default label set.
pub const DEFAULT_LABELS: [&str; 10] = [
    "airport",
    "bus",
    "metro",
    "metro_station",
    "park",
    "public_square",
    "shopping_mall",
    "street_pedestrian",
    "street_traffic",
    "tram",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path as written in the manifest, relative to the manifest's directory.
    pub path: PathBuf,
    pub scene_label: String,
    pub device_id: String,
    pub city: Option<String>,
    pub split: Split,
}

impl ManifestEntry {
    /// Recording identifier: the file stem.
    pub fn id(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }

    pub fn label_index(&self, labels: &[String]) -> Option<usize> {
        labels.iter().position(|l| *l == self.scene_label)
    }
}

/// Loads a manifest file. Delimiter is tab when the header row contains one, comma otherwise.
pub fn load_manifest(path: impl AsRef<Path>, label_set: &[String]) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, label_set)
}

pub fn parse_manifest(text: &str, label_set: &[String]) -> Result<Vec<ManifestEntry>> {
    let header_line = text.lines().next().unwrap_or_default();
    let delimiter = if header_line.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| Error::Validation(format!("manifest header: {e}")))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let filename_col = column("filename")
        .ok_or_else(|| Error::Validation("manifest header lacks `filename`".into()))?;
    let label_col = column("scene_label")
        .ok_or_else(|| Error::Validation("manifest header lacks `scene_label`".into()))?;
    let device_col = column("device");
    let city_col = column("city");
    let split_col = column("split");

    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Validation(format!("manifest: {e}")))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |col: Option<usize>| {
            col.and_then(|c| record.get(c))
                .filter(|s| !s.is_empty())
                .map(str::to_string)
        };
        let filename = field(Some(filename_col))
            .ok_or_else(|| Error::Validation(format!("line {line}: empty filename")))?;
        let scene_label = field(Some(label_col)).unwrap_or_default();
        if !label_set.contains(&scene_label) {
            return Err(Error::Validation(format!(
                "line {line}: unknown scene_label {scene_label:?}"
            )));
        }
        let split = match field(split_col).as_deref() {
            None | Some("train") => Split::Train,
            Some("eval") | Some("evaluate") | Some("test") => Split::Eval,
            Some(other) => {
                return Err(Error::Validation(format!(
                    "line {line}: split must be train or eval, got {other:?}"
                )))
            }
        };
        entries.push(ManifestEntry {
            path: PathBuf::from(filename),
            scene_label,
            device_id: field(device_col).unwrap_or_default(),
            city: field(city_col),
            split,
        });
    }
    Ok(entries)
}
