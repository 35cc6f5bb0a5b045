//! Co-located (human reconstruction, original) patch pairs for
//! post-processor training.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::codec::ScalableCodec;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::imaging::{load_image, patch_origins, DatasetManifest, Image};

const MAGIC: [u8; 4] = *b"SPRS";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub compressed: Image,
    pub original: Image,
    pub image_id: String,
    /// Patch origin within the source image.
    pub x: usize,
    pub y: usize,
}

/// Training pairs produced at a single λ.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub lambda: f64,
    pairs: Vec<Pair>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    lambda: f64,
    pairs: Vec<PairInfo>,
}

#[derive(Serialize, Deserialize)]
struct PairInfo {
    image_id: String,
    x: usize,
    y: usize,
    width: usize,
    height: usize,
}

impl PairSet {
    pub fn new(lambda: f64, pairs: Vec<Pair>) -> Result<Self> {
        if let Some(p) = pairs.iter().find(|p| p.compressed.dims() != p.original.dims()) {
            return Err(Error::DimensionMismatch(format!(
                "pair from '{}': {:?} vs {:?}",
                p.image_id,
                p.compressed.dims(),
                p.original.dims()
            )));
        }
        Ok(PairSet { lambda, pairs })
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Binary container: magic, u32 version, u64 header length, JSON
    /// header, then each pair's compressed and original 8-bit RGB samples.
    /// Decoded reconstructions are 8-bit already, so storage is lossless.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            lambda: self.lambda,
            pairs: self
                .pairs
                .iter()
                .map(|p| PairInfo {
                    image_id: p.image_id.clone(),
                    x: p.x,
                    y: p.y,
                    width: p.original.width(),
                    height: p.original.height(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("pair header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for p in &self.pairs {
            out.extend_from_slice(&p.compressed.to_rgb8());
            out.extend_from_slice(&p.original.to_rgb8());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Decode(format!("pair set: {m}"));
        if bytes.len() < 16 || bytes[..4] != MAGIC {
            return Err(bad("missing magic"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = bytes.get(16..).ok_or_else(|| bad("truncated"))?;
        if body.len() < hlen {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&body[..hlen])?;
        let mut rest = &body[hlen..];
        let mut pairs = Vec::with_capacity(header.pairs.len());
        for info in header.pairs {
            let n = info.width * info.height * 3;
            if rest.len() < 2 * n {
                return Err(bad("truncated samples"));
            }
            let compressed = Image::from_rgb8(info.width, info.height, &rest[..n])?;
            let original = Image::from_rgb8(info.width, info.height, &rest[n..2 * n])?;
            rest = &rest[2 * n..];
            pairs.push(Pair {
                compressed,
                original,
                image_id: info.image_id,
                x: info.x,
                y: info.y,
            });
        }
        if !rest.is_empty() {
            return Err(bad("trailing bytes"));
        }
        PairSet::new(header.lambda, pairs)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Compresses each image through both layers and cuts co-located patches
/// (stride = patch) from the human reconstruction and the original.
pub fn build_pairs_from(images: &[(String, Image)], codec: &ScalableCodec, lambda: f64, patch: usize) -> Result<PairSet> {
    let per_image: Vec<Vec<Pair>> = images
        .par_iter()
        .map(|(id, original)| {
            let human = codec.compress(original)?.human;
            Ok(patch_origins(original.width(), original.height(), patch, patch)
                .into_iter()
                .map(|(x, y)| Pair {
                    compressed: human.crop(x, y, patch, patch),
                    original: original.crop(x, y, patch, patch),
                    image_id: id.clone(),
                    x,
                    y,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    PairSet::new(lambda, per_image.into_iter().flatten().collect())
}

pub fn build_pairs(manifest: &DatasetManifest, base_ckpt: &Checkpoint, enh_ckpt: &Checkpoint, patch: usize) -> Result<PairSet> {
    if manifest.is_empty() {
        return Err(Error::EmptyDataset(format!("manifest '{}' has no entries", manifest.split_tag)));
    }
    let codec = ScalableCodec::from_checkpoints(base_ckpt, enh_ckpt)?;
    let images = manifest
        .entries()
        .iter()
        .map(|e| Ok((e.image_id.clone(), load_image(&e.path)?)))
        .collect::<Result<Vec<_>>>()?;
    let lambda = enh_ckpt.provenance.lambda.unwrap_or(f64::NAN);
    build_pairs_from(&images, &codec, lambda, patch)
}
