//! Minimal RIFF/WAVE reader for mono PCM-16 and IEEE float-32 files.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// A decoded mono recording with samples normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub id: String,
}

impl AudioClip {
    pub fn new(id: impl Into<String>, samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Validation("audio clip has no samples".into()));
        }
        if sample_rate == 0 {
            return Err(Error::Validation("sample rate must be positive".into()));
        }
        if let Some(i) = samples
            .iter()
            .position(|s| !s.is_finite() || s.abs() > 1.0)
        {
            return Err(Error::Validation(format!(
                "sample {i} = {} is outside [-1, 1]",
                samples[i]
            )));
        }
        Ok(AudioClip {
            samples,
            sample_rate,
            id: id.into(),
        })
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Reads a mono WAV file. The clip id is the file stem.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_wav(&bytes, id)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Decode {
                offset: self.pos as u64,
                message: format!("truncated while reading {what}"),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

struct Format {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

/// Decodes an in-memory WAV container.
pub fn decode_wav(bytes: &[u8], id: impl Into<String>) -> Result<AudioClip> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if cur.take(4, "RIFF tag")? != b"RIFF" {
        return Err(Error::Decode {
            offset: 0,
            message: "missing RIFF tag".into(),
        });
    }
    let _riff_len = cur.u32("RIFF length")?;
    if cur.take(4, "WAVE tag")? != b"WAVE" {
        return Err(Error::Decode {
            offset: 8,
            message: "missing WAVE tag".into(),
        });
    }

    let mut format: Option<Format> = None;
    loop {
        if cur.pos == bytes.len() {
            return Err(Error::Decode {
                offset: cur.pos as u64,
                message: "no data chunk".into(),
            });
        }
        let chunk_start = cur.pos;
        let tag = cur.take(4, "chunk id")?;
        let len = cur.u32("chunk length")? as usize;
        match tag {
            b"fmt " => {
                if len < 16 {
                    return Err(Error::Decode {
                        offset: chunk_start as u64,
                        message: format!("fmt chunk too short ({len} bytes)"),
                    });
                }
                let body_start = cur.pos;
                let mut tag = cur.u16("format tag")?;
                let channels = cur.u16("channel count")?;
                let sample_rate = cur.u32("sample rate")?;
                let _byte_rate = cur.u32("byte rate")?;
                let _block_align = cur.u16("block align")?;
                let bits = cur.u16("bits per sample")?;
                if tag == FORMAT_EXTENSIBLE {
                    if len < 40 {
                        return Err(Error::Decode {
                            offset: chunk_start as u64,
                            message: "extensible fmt chunk too short".into(),
                        });
                    }
                    let _cb = cur.u16("extension size")?;
                    let _valid = cur.u16("valid bits")?;
                    let _mask = cur.u32("channel mask")?;
                    // first two bytes of the sub-format GUID carry the format tag
                    tag = cur.u16("sub-format")?;
                }
                cur.pos = body_start;
                cur.take(len + (len & 1), "fmt chunk body")?;
                format = Some(Format {
                    tag,
                    channels,
                    sample_rate,
                    bits,
                });
            }
            b"data" => {
                let fmt = format.ok_or_else(|| Error::Decode {
                    offset: chunk_start as u64,
                    message: "data chunk precedes fmt chunk".into(),
                })?;
                let data_offset = cur.pos as u64;
                let data = cur.take(len, "data chunk")?;
                return decode_samples(&fmt, data, data_offset, id.into());
            }
            _ => {
                cur.take(len + (len & 1), "chunk body")?;
            }
        }
    }
}

fn decode_samples(fmt: &Format, data: &[u8], offset: u64, id: String) -> Result<AudioClip> {
    if fmt.channels != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "{} channels; only mono input is accepted",
            fmt.channels
        )));
    }
    if fmt.sample_rate == 0 {
        return Err(Error::Decode {
            offset,
            message: "sample rate is zero".into(),
        });
    }
    let samples: Vec<f32> = match (fmt.tag, fmt.bits) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]) as f32 / 32768.0)
            .collect(),
        (FORMAT_IEEE_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect(),
        (tag, bits) => {
            return Err(Error::UnsupportedFormat(format!(
                "format tag {tag} with {bits} bits per sample"
            )))
        }
    };
    if samples.is_empty() {
        return Err(Error::Decode {
            offset,
            message: "data chunk holds no samples".into(),
        });
    }
    let width = fmt.bits as u64 / 8;
    if let Some(i) = samples
        .iter()
        .position(|s| !s.is_finite() || s.abs() > 1.0)
    {
        return Err(Error::Decode {
            offset: offset + i as u64 * width,
            message: format!("sample value {} outside [-1, 1]", samples[i]),
        });
    }
    Ok(AudioClip {
        samples,
        sample_rate: fmt.sample_rate,
        id,
    })
}

/// Writes a clip as mono 16-bit PCM. Samples are scaled by 32768 and clamped.
pub fn write_wav_pcm16(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let path = path.as_ref();
    let data_len = (clip.samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &clip.samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
