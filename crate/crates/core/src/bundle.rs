//! Versioned binary model bundles.
//!
//! Layout: magic `RGRK`, format version (u32 LE), length-prefixed JSON
//! metadata (configs, mode, feature stats, threshold, provenance), a
//! length-prefixed tensor section (name, dims, f64 LE data per tensor),
//! and a trailing FNV-1a 64 checksum over everything before it.
//!
//! A loaded bundle reproduces bit-identical eval-mode logits: tensor data
//! round-trips as raw IEEE-754 bytes. Version mismatches and corruption
//! are rejected outright, never coerced.

use std::path::Path;

use ndarray::ArrayViewD;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::encoder::{EncoderConfig, EncoderWeights};
use crate::nn::fusion::{FusionHead, FusionModel, ModelMode};
use crate::nn::mlp::{MlpConfig, MlpWeights};
use crate::similarity::RatioMode;
use crate::train::{FeatureStats, Provenance};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"RGRK";

#[derive(Debug, Serialize, Deserialize)]
struct BundleMeta {
    mode: ModelMode,
    similarity_mode: RatioMode,
    threshold: f64,
    feature_stats: FeatureStats,
    mlp_cfg: Option<MlpConfig>,
    encoder_cfg: Option<EncoderConfig>,
    head_input_dim: Option<usize>,
    provenance: Provenance,
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn named_tensor_views(model: &FusionModel) -> Vec<(String, ArrayViewD<'_, f64>)> {
    let mut v = Vec::new();
    if let Some(mlp) = &model.mlp {
        v.extend(mlp.named_tensors());
    }
    if let Some(enc) = &model.encoder {
        v.extend(enc.named_tensors());
    }
    if let Some(head) = &model.head {
        v.extend(head.named_tensors());
    }
    v
}

/// Serialize a model bundle to bytes.
pub fn encode_model(model: &FusionModel) -> Vec<u8> {
    let meta = BundleMeta {
        mode: model.mode,
        similarity_mode: model.similarity_mode,
        threshold: model.threshold,
        feature_stats: model.feature_stats,
        mlp_cfg: model.mlp.as_ref().map(|m| m.cfg.clone()),
        encoder_cfg: model.encoder.as_ref().map(|e| e.cfg.clone()),
        head_input_dim: model.head.as_ref().map(|h| h.input_dim()),
        provenance: model.provenance.clone(),
    };
    let meta_json = serde_json::to_vec(&meta).expect("metadata serializes");

    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(meta_json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&meta_json);

    let tensors = named_tensor_views(model);
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, view) in tensors {
        let name_bytes = name.as_bytes();
        buf.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
        buf.extend_from_slice(name_bytes);
        buf.push(view.ndim() as u8);
        for &d in view.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in view.iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let checksum = fnv1a64(&buf);
    buf.extend_from_slice(&checksum.to_le_bytes());
    buf
}

pub fn save_model(model: &FusionModel, path: &Path) -> Result<()> {
    std::fs::write(path, encode_model(model))?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::CorruptBundle(format!(
                "truncated at byte {} (needed {n} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

/// Decode a model bundle. Rejects wrong magic, unsupported versions, and
/// any checksum or structural damage without partial effects.
pub fn decode_model(bytes: &[u8]) -> Result<FusionModel> {
    if bytes.len() < MAGIC.len() + 4 + 8 {
        return Err(Error::CorruptBundle("file too short".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::CorruptBundle("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    if fnv1a64(body) != stored {
        return Err(Error::CorruptBundle("checksum mismatch".into()));
    }

    let mut r = Reader {
        bytes: body,
        pos: 8,
    };
    let meta_len = r.u64()? as usize;
    let meta_bytes = r.take(meta_len)?;
    let meta: BundleMeta = serde_json::from_slice(meta_bytes)
        .map_err(|e| Error::CorruptBundle(format!("bad metadata: {e}")))?;

    let mlp = meta.mlp_cfg.map(MlpWeights::init).transpose()?;
    let encoder = meta.encoder_cfg.map(EncoderWeights::init).transpose()?;
    let head = meta.head_input_dim.map(|dim| FusionHead::init(dim, 0));
    let mut model = FusionModel {
        mode: meta.mode,
        mlp,
        encoder,
        head,
        feature_stats: meta.feature_stats,
        threshold: meta.threshold,
        similarity_mode: meta.similarity_mode,
        provenance: meta.provenance,
    };

    let tensor_count = r.u32()? as usize;
    let mut targets = Vec::new();
    if let Some(mlp) = &mut model.mlp {
        targets.extend(mlp.named_tensors_mut());
    }
    if let Some(enc) = &mut model.encoder {
        targets.extend(enc.named_tensors_mut());
    }
    if let Some(head) = &mut model.head {
        targets.extend(head.named_tensors_mut());
    }
    if tensor_count != targets.len() {
        return Err(Error::CorruptBundle(format!(
            "expected {} tensors, found {tensor_count}",
            targets.len()
        )));
    }
    for (expected_name, mut target) in targets {
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::CorruptBundle("tensor name is not UTF-8".into()))?;
        if name != expected_name {
            return Err(Error::CorruptBundle(format!(
                "tensor order mismatch: expected {expected_name}, found {name}"
            )));
        }
        let ndim = r.u8()? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(r.u64()? as usize);
        }
        if dims.as_slice() != target.shape() {
            return Err(Error::CorruptBundle(format!(
                "tensor {name}: shape {:?} does not match config shape {:?}",
                dims,
                target.shape()
            )));
        }
        let count: usize = dims.iter().product();
        let data = r.take(count * 8)?;
        for (slot, chunk) in target.iter_mut().zip(data.chunks_exact(8)) {
            *slot = f64::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    if r.pos != body.len() {
        return Err(Error::CorruptBundle(format!(
            "{} trailing bytes after tensor section",
            body.len() - r.pos
        )));
    }
    Ok(model)
}

pub fn load_model(path: &Path) -> Result<FusionModel> {
    let bytes = std::fs::read(path)?;
    decode_model(&bytes)
}
