//! Versioned named-tensor checkpoint bundle.
//!
//! Binary layout: magic "DSGC", format version u32, tensor count u32, then
//! per tensor: name (u32 length + UTF-8), dtype tag u8 (0 = f32, 1 = u8),
//! rank u8, dims (u32 each), little-endian payload. Metadata (parent hash,
//! config hash, code version) rides along as u8 tensors under `meta.*`.

use super::policy::MlpPolicy;
use super::tape::ParamStore;
use super::tensor::Tensor;
use crate::io;
use std::path::Path;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"DSGC";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic (not a checkpoint file)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("unknown dtype tag {0}")]
    BadDtype(u8),
    #[error("truncated checkpoint")]
    Truncated,
    #[error("checkpoint missing tensor {0}")]
    Missing(String),
    #[error("malformed tensor {0}: {1}")]
    Malformed(String, String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F32 { dims: Vec<u32>, data: Vec<f32> },
    U8 { dims: Vec<u32>, data: Vec<u8> },
}

/// A named-tensor bundle: the serialized form of a policy (plus metadata).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolicyCheckpoint {
    pub tensors: Vec<(String, TensorData)>,
}

impl PolicyCheckpoint {
    pub fn get(&self, name: &str) -> Option<&TensorData> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn push_f32(&mut self, name: &str, dims: Vec<u32>, data: Vec<f32>) {
        self.tensors
            .push((name.to_string(), TensorData::F32 { dims, data }));
    }

    pub fn push_meta(&mut self, name: &str, bytes: Vec<u8>) {
        let dims = vec![bytes.len() as u32];
        self.tensors
            .push((name.to_string(), TensorData::U8 { dims, data: bytes }));
    }

    pub fn meta_bytes(&self, name: &str) -> Option<&[u8]> {
        match self.get(name) {
            Some(TensorData::U8 { data, .. }) => Some(data),
            _ => None,
        }
    }

    pub fn meta_u64(&self, name: &str) -> Option<u64> {
        self.meta_bytes(name).and_then(|b| {
            b.try_into().ok().map(u64::from_le_bytes)
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            match t {
                TensorData::F32 { dims, data } => {
                    out.push(0u8);
                    out.push(dims.len() as u8);
                    for d in dims {
                        out.extend_from_slice(&d.to_le_bytes());
                    }
                    for v in data {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
                TensorData::U8 { dims, data } => {
                    out.push(1u8);
                    out.push(dims.len() as u8);
                    for d in dims {
                        out.extend_from_slice(&d.to_le_bytes());
                    }
                    out.extend_from_slice(data);
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::BadVersion(version));
        }
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|e| CheckpointError::Malformed("<name>".into(), e.to_string()))?;
            let dtype = r.u8()?;
            let rank = r.u8()? as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(r.u32()?);
            }
            let numel: usize = dims.iter().map(|&d| d as usize).product();
            let data = match dtype {
                0 => {
                    let raw = r.take(numel * 4)?;
                    let mut data = Vec::with_capacity(numel);
                    for c in raw.chunks_exact(4) {
                        data.push(f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
                    }
                    TensorData::F32 { dims, data }
                }
                1 => TensorData::U8 {
                    dims,
                    data: r.take(numel)?.to_vec(),
                },
                other => return Err(CheckpointError::BadDtype(other)),
            };
            tensors.push((name, data));
        }
        Ok(PolicyCheckpoint { tensors })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        io::atomic_write(path, &self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }

    /// Fingerprint of the whole serialized bundle (metadata included).
    pub fn hash(&self) -> u64 {
        io::fnv_bytes(&self.to_bytes())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.bytes.len() {
            return Err(CheckpointError::Truncated);
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Bundle metadata stamped into every checkpoint.
#[derive(Clone, Debug, Default)]
pub struct CheckpointMeta {
    pub parent_hash: Option<u64>,
    pub config_hash: u64,
    pub seed: u64,
}

impl MlpPolicy {
    /// Snapshot parameters (plus lineage metadata) into a bundle.
    pub fn to_checkpoint(&self, meta: &CheckpointMeta) -> PolicyCheckpoint {
        let mut ckpt = PolicyCheckpoint::default();
        for (name, t) in self.store.iter() {
            let dims: Vec<u32> = t.shape.iter().map(|&d| d as u32).collect();
            ckpt.push_f32(name, dims, t.data.clone());
        }
        ckpt.push_meta(
            "meta.parent_hash",
            meta.parent_hash.unwrap_or(0).to_le_bytes().to_vec(),
        );
        ckpt.push_meta("meta.config_hash", meta.config_hash.to_le_bytes().to_vec());
        ckpt.push_meta("meta.seed", meta.seed.to_le_bytes().to_vec());
        ckpt.push_meta("meta.code_version", io::code_version().into_bytes());
        ckpt
    }

    /// Rebuild a policy from a bundle; dims come from the stored tensors.
    pub fn from_checkpoint(ckpt: &PolicyCheckpoint) -> Result<Self, CheckpointError> {
        let (input_dim, hidden) = match ckpt.get("actor.w0") {
            Some(TensorData::F32 { dims, .. }) if dims.len() == 2 => {
                (dims[0] as usize, dims[1] as usize)
            }
            _ => return Err(CheckpointError::Missing("actor.w0".into())),
        };
        let action_dim = match ckpt.get("actor.w2") {
            Some(TensorData::F32 { dims, .. }) if dims.len() == 2 => dims[1] as usize,
            _ => return Err(CheckpointError::Missing("actor.w2".into())),
        };
        if hidden != super::policy::HIDDEN {
            return Err(CheckpointError::Malformed(
                "actor.w0".into(),
                format!("hidden width {hidden} unsupported"),
            ));
        }
        let mut stream = crate::rng::stream(0, crate::rng::Purpose::Init, 0, 0);
        let mut policy = MlpPolicy::new(input_dim, action_dim, &mut stream);
        for id in 0..policy.store.len() {
            let name = policy.store.name(id).to_string();
            match ckpt.get(&name) {
                Some(TensorData::F32 { dims, data }) => {
                    let want: Vec<u32> =
                        policy.store.get(id).shape.iter().map(|&d| d as u32).collect();
                    if *dims != want {
                        return Err(CheckpointError::Malformed(
                            name.clone(),
                            format!("dims {dims:?}, expected {want:?}"),
                        ));
                    }
                    policy.store.get_mut(id).data.copy_from_slice(data);
                }
                _ => return Err(CheckpointError::Missing(name)),
            }
        }
        Ok(policy)
    }
}

/// Hash of a parameter store's values only (no metadata).
pub fn params_hash(store: &ParamStore) -> u64 {
    store.params_hash()
}

/// Convert a stored f32 tensor back into a runtime tensor.
pub fn tensor_from(data: &TensorData) -> Option<Tensor> {
    match data {
        TensorData::F32 { dims, data } => {
            let shape: Vec<usize> = dims.iter().map(|&d| d as usize).collect();
            Some(Tensor::from_vec(&shape, data.clone()))
        }
        TensorData::U8 { .. } => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn roundtrip_bitwise() {
        let mut s = rng::stream(7, rng::Purpose::Init, 0, 0);
        let policy = MlpPolicy::new(16, 4, &mut s);
        let meta = CheckpointMeta {
            parent_hash: Some(42),
            config_hash: 7,
            seed: 9,
        };
        let ckpt = policy.to_checkpoint(&meta);
        let bytes = ckpt.to_bytes();
        let back = PolicyCheckpoint::from_bytes(&bytes).unwrap();
        assert_eq!(ckpt, back);
        let policy2 = MlpPolicy::from_checkpoint(&back).unwrap();
        assert_eq!(policy.store.params_hash(), policy2.store.params_hash());
        // Forward agreement, bitwise.
        let obs: Vec<f32> = (0..16).map(|i| (i as f32) * 0.04 - 0.3).collect();
        let (a, va) = policy.forward(&obs, 1);
        let (b, vb) = policy2.forward(&obs, 1);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(va[0].to_bits(), vb[0].to_bits());
        assert_eq!(back.meta_u64("meta.parent_hash"), Some(42));
    }

    #[test]
    fn reader_rejects_bad_magic_and_version() {
        assert!(matches!(
            PolicyCheckpoint::from_bytes(b"NOPE\x01\x00\x00\x00\x00\x00\x00\x00"),
            Err(CheckpointError::BadMagic)
        ));
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&99u32.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        assert!(matches!(
            PolicyCheckpoint::from_bytes(&bytes),
            Err(CheckpointError::BadVersion(99))
        ));
    }

    #[test]
    fn truncation_detected() {
        let mut s = rng::stream(8, rng::Purpose::Init, 0, 0);
        let policy = MlpPolicy::new(8, 2, &mut s);
        let bytes = policy.to_checkpoint(&CheckpointMeta::default()).to_bytes();
        assert!(matches!(
            PolicyCheckpoint::from_bytes(&bytes[..bytes.len() - 3]),
            Err(CheckpointError::Truncated)
        ));
    }
}
