//! Binary model checkpoints.
//!
//! Layout, all integers `u32` little-endian: magic `ASCK`, version, header
//! length, a JSON header (model spec, front-end settings and config hash), tensor count, then per
//! tensor: name length, UTF-8 name, one trainable-flag byte, rank, extents,
//! and the `f32` values.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cnn7::ModelSpec;
use crate::error::{Error, Result};
use crate::frontend::FrontendConfig;
use crate::nn::{Network, Tensor};

const MAGIC: &[u8; 4] = b"ASCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub model: ModelSpec,
    /// Front end whose features the model was trained on.
    pub frontend: FrontendConfig,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub trainable: bool,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    /// Snapshot of every trainable parameter and batch-norm statistic.
    pub fn from_network(header: CheckpointHeader, net: &Network<f32>) -> Self {
        let params = net.params().into_iter().map(|p| NamedTensor {
            name: p.name.clone(),
            trainable: true,
            shape: p.value.shape().to_vec(),
            data: p.value.data().to_vec(),
        });
        let buffers = net.buffers().into_iter().map(|(name, t)| NamedTensor {
            name,
            trainable: false,
            shape: t.shape().to_vec(),
            data: t.data().to_vec(),
        });
        Checkpoint {
            header,
            tensors: params.chain(buffers).collect(),
        }
    }

    /// Number of trainable scalars stored.
    pub fn trainable_count(&self) -> usize {
        self.tensors
            .iter()
            .filter(|t| t.trainable)
            .map(|t| t.data.len())
            .sum()
    }

    /// Rebuilds the network and loads every stored tensor into it.
    pub fn to_network(&self) -> Result<Network<f32>> {
        let mut net = self.header.model.network::<f32>(0)?;
        let expected = net.params().len() + net.buffers().len();
        if expected != self.tensors.len() {
            return Err(Error::Validation(format!(
                "checkpoint holds {} tensors, model expects {expected}",
                self.tensors.len()
            )));
        }
        for t in &self.tensors {
            let slot = net
                .tensor_mut(&t.name)
                .ok_or_else(|| Error::Validation(format!("checkpoint tensor {} not in model", t.name)))?;
            slot.expect_shape(&t.name, &t.shape)?;
            *slot = Tensor::from_vec(&t.shape, t.data.clone())?;
        }
        Ok(net)
    }

    pub fn encode(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::new();
        let put = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
        out.extend_from_slice(MAGIC);
        put(&mut out, VERSION as usize);
        put(&mut out, header.len());
        out.extend_from_slice(&header);
        put(&mut out, self.tensors.len());
        for t in &self.tensors {
            put(&mut out, t.name.len());
            out.extend_from_slice(t.name.as_bytes());
            out.push(u8::from(t.trainable));
            put(&mut out, t.shape.len());
            for &d in &t.shape {
                put(&mut out, d);
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Decode {
                offset: 0,
                message: "not a checkpoint (bad magic)".into(),
            });
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Decode {
                offset: 4,
                message: format!("unsupported checkpoint version {version}"),
            });
        }
        let len = r.u32()? as usize;
        let at = r.pos;
        let header: CheckpointHeader = serde_json::from_slice(r.take(len)?).map_err(|e| Error::Decode {
            offset: at as u64,
            message: format!("header: {e}"),
        })?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let n = r.u32()? as usize;
            let at = r.pos;
            let name = String::from_utf8(r.take(n)?.to_vec()).map_err(|_| Error::Decode {
                offset: at as u64,
                message: "tensor name is not UTF-8".into(),
            })?;
            let trainable = r.take(1)?[0] != 0;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let len: usize = shape.iter().product();
            let raw = r.take(len.checked_mul(4).ok_or_else(|| r.error("tensor too large"))?)?;
            let data = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            tensors.push(NamedTensor {
                name,
                trainable,
                shape,
                data,
            });
        }
        if r.pos != bytes.len() {
            return Err(r.error("trailing bytes after last tensor"));
        }
        Ok(Checkpoint { header, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn error(&self, message: &str) -> Error {
        Error::Decode {
            offset: self.pos as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.error("unexpected end of checkpoint")),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
