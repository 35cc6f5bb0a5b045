//! Checkpoint container shared by codec layers and post-processors.
//!
//! ```text
//! "SCKP" | u32 version | u64 header_len | header (JSON) | tensor data
//! ```
//!
//! The JSON header holds the kind, model configuration, tensor index
//! (name and shape, in storage order), optional frozen entropy tables and
//! training provenance. Tensor data follows as little-endian `f32`, in
//! index order. Serialization is deterministic, so loading and re-saving a
//! checkpoint reproduces it byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::{CodecConfig, EntropyModel};
use crate::error::{Error, Result};
use crate::nn::{Parameters, Real};
use crate::postproc::RrdbConfig;

const MAGIC: [u8; 4] = *b"SCKP";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointKind {
    BaseCodec,
    EnhCodec,
    Postproc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelConfig {
    Codec(CodecConfig),
    Postproc(RrdbConfig),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub epochs: usize,
    pub steps: u64,
    pub final_loss: f64,
    pub lambda: Option<f64>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub patch: usize,
    /// Fingerprint of the checkpoint this one was trained on top of.
    pub parent_fingerprint: Option<String>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: CheckpointKind,
    pub config: ModelConfig,
    pub tensors: Vec<NamedTensor>,
    pub entropy: Option<EntropyModel>,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: CheckpointKind,
    config: ModelConfig,
    tensors: Vec<TensorInfo>,
    entropy: Option<EntropyModel>,
    provenance: Provenance,
}

impl Checkpoint {
    pub fn new(kind: CheckpointKind, config: ModelConfig, provenance: Provenance) -> Self {
        Checkpoint {
            kind,
            config,
            tensors: Vec::new(),
            entropy: None,
            provenance,
        }
    }

    /// Snapshot of a model's parameters, stored as `f32`.
    pub fn set_parameters<R: Real, M: Parameters<R>>(&mut self, model: &M) {
        let mut tensors = Vec::new();
        model.visit(&mut |name, shape, data| {
            tensors.push(NamedTensor {
                name: name.to_string(),
                shape: shape.to_vec(),
                data: data.iter().map(|v| v.to_f64_lossy() as f32).collect(),
            })
        });
        self.tensors = tensors;
    }

    /// Copies stored tensors into `model`, which must have the identical
    /// tensor index.
    pub fn load_parameters<R: Real, M: Parameters<R>>(&self, model: &mut M) -> Result<()> {
        let mut expected = Vec::new();
        model.visit(&mut |name, shape, _| expected.push((name.to_string(), shape.to_vec())));
        if expected.len() != self.tensors.len() {
            return Err(Error::CheckpointMismatch(format!(
                "model has {} tensors, checkpoint {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        for ((name, shape), t) in expected.iter().zip(&self.tensors) {
            if *name != t.name || *shape != t.shape {
                return Err(Error::CheckpointMismatch(format!(
                    "tensor {name} {shape:?} vs stored {} {:?}",
                    t.name, t.shape
                )));
            }
        }
        let mut i = 0;
        let tensors = &self.tensors;
        model.visit_mut(&mut |_, data| {
            for (d, &s) in data.iter_mut().zip(&tensors[i].data) {
                *d = R::lit(s as f64);
            }
            i += 1;
        });
        Ok(())
    }

    pub fn codec_config(&self) -> Result<&CodecConfig> {
        match &self.config {
            ModelConfig::Codec(c) => Ok(c),
            ModelConfig::Postproc(_) => Err(Error::CheckpointMismatch(
                "expected a codec checkpoint, found a post-processor".into(),
            )),
        }
    }

    pub fn rrdb_config(&self) -> Result<&RrdbConfig> {
        match &self.config {
            ModelConfig::Postproc(c) => Ok(c),
            ModelConfig::Codec(_) => Err(Error::CheckpointMismatch(
                "expected a post-processor checkpoint, found a codec".into(),
            )),
        }
    }

    pub fn expect_kind(&self, kind: CheckpointKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::CheckpointMismatch(format!(
                "expected {kind:?} checkpoint, found {:?}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            kind: self.kind,
            config: self.config.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| TensorInfo {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                })
                .collect(),
            entropy: self.entropy.clone(),
            provenance: self.provenance.clone(),
        };
        let json = serde_json::to_vec(&header).expect("checkpoint header serializes");
        let n: usize = self.tensors.iter().map(|t| t.data.len()).sum();
        let mut out = Vec::with_capacity(16 + json.len() + 4 * n);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in &self.tensors {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || bytes[..4] != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = &bytes[16..];
        if body.len() < hlen {
            return Err(Error::Checkpoint("truncated header".into()));
        }
        let header: Header = serde_json::from_slice(&body[..hlen])?;
        let mut data = &body[hlen..];
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for info in header.tensors {
            let n: usize = info.shape.iter().product();
            if data.len() < 4 * n {
                return Err(Error::Checkpoint(format!("truncated tensor {}", info.name)));
            }
            let values = data[..4 * n]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            data = &data[4 * n..];
            tensors.push(NamedTensor {
                name: info.name,
                shape: info.shape,
                data: values,
            });
        }
        if !data.is_empty() {
            return Err(Error::Checkpoint("trailing bytes after tensors".into()));
        }
        if let Some(e) = &header.entropy {
            e.validate()?;
        }
        Ok(Checkpoint {
            kind: header.kind,
            config: header.config,
            tensors,
            entropy: header.entropy,
            provenance: header.provenance,
        })
    }

    /// Hex SHA-256 of the serialized checkpoint.
    pub fn fingerprint(&self) -> String {
        Sha256::digest(self.to_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Atomic write (temp file + rename).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::fsutil::write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
