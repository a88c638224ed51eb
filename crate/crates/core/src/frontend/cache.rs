//! On-disk feature cache: `<id>.feat` holds the spectrogram, `<id>.json` the
//! front-end configuration that produced it.
//!
//! `.feat` layout, all little-endian: magic `ASCF`, `u32` version, `u32` kind
//! tag (0 mel, 1 gam, 2 cqt), `u32` rank (3), three `u32` extents, then the
//! `f32` values in `[bin][frame][channel]` order.

use std::fs;
use std::path::{Path, PathBuf};

use super::{FrontendConfig, FrontendKind, Spectrogram, N_CHANNELS};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"ASCF";
const VERSION: u32 = 1;

pub fn cache_paths(dir: &Path, id: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{id}.feat")), dir.join(format!("{id}.json")))
}

pub fn encode_spectrogram(spec: &Spectrogram) -> Vec<u8> {
    let mut out = Vec::with_capacity(28 + spec.values.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&spec.kind.tag().to_le_bytes());
    out.extend_from_slice(&3u32.to_le_bytes());
    for d in spec.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in &spec.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_spectrogram(bytes: &[u8]) -> Result<Spectrogram> {
    let word = |i: usize| -> Result<u32> {
        bytes
            .get(i * 4..i * 4 + 4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or(Error::Decode {
                offset: (i * 4) as u64,
                message: "truncated feature header".into(),
            })
    };
    if bytes.get(..4) != Some(MAGIC.as_slice()) {
        return Err(Error::Decode {
            offset: 0,
            message: "not a feature cache file".into(),
        });
    }
    if word(1)? != VERSION {
        return Err(Error::Decode {
            offset: 4,
            message: format!("unsupported feature cache version {}", word(1)?),
        });
    }
    let kind = FrontendKind::from_tag(word(2)?).ok_or(Error::Decode {
        offset: 8,
        message: "unknown front-end kind tag".into(),
    })?;
    if word(3)? != 3 || word(6)? as usize != N_CHANNELS {
        return Err(Error::Decode {
            offset: 12,
            message: "feature tensor must be [bins × frames × 3]".into(),
        });
    }
    let (n_bins, n_frames) = (word(4)? as usize, word(5)? as usize);
    let body = &bytes[28..];
    let expected = n_bins * n_frames * N_CHANNELS * 4;
    if body.len() != expected {
        return Err(Error::Decode {
            offset: 28,
            message: format!("payload is {} bytes, header implies {expected}", body.len()),
        });
    }
    let values = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Spectrogram::new(kind, n_bins, n_frames, values)
}

pub fn write_cached(dir: &Path, id: &str, spec: &Spectrogram, cfg: &FrontendConfig) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (feat, sidecar) = cache_paths(dir, id);
    fs::write(&feat, encode_spectrogram(spec)).map_err(|e| Error::io(&feat, e))?;
    let json = serde_json::to_string_pretty(cfg).expect("frontend config serializes");
    fs::write(&sidecar, json).map_err(|e| Error::io(&sidecar, e))
}

/// Returns the cached spectrogram only when its sidecar config equals `cfg`.
pub fn read_cached(dir: &Path, id: &str, cfg: &FrontendConfig) -> Result<Option<Spectrogram>> {
    let (feat, sidecar) = cache_paths(dir, id);
    if !feat.exists() || !sidecar.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let stored: FrontendConfig = match serde_json::from_str(&text) {
        Ok(c) => c,
        Err(_) => return Ok(None),
    };
    if stored != *cfg {
        return Ok(None);
    }
    let bytes = fs::read(&feat).map_err(|e| Error::io(&feat, e))?;
    decode_spectrogram(&bytes).map(Some)
}
