//! Audio decoding and dataset manifests.

mod manifest;
mod wav;

pub use manifest::{load_manifest, parse_manifest, ManifestEntry, Split, DEFAULT_LABELS};
pub use wav::{decode_wav, read_wav, write_wav_pcm16, AudioClip};
