use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const WEIGHT_MAGIC: &[u8; 4] = b"ACNW";
pub const WEIGHT_VERSION: u32 = 1;

/// Ordered map of named tensors, serialized in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightStore {
    tensors: IndexMap<String, Tensor>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if tensor.rank() == 0 {
            return Err(Error::InvalidTensor {
                name,
                reason: "rank must be at least 1".into(),
            });
        }
        if name.len() > u16::MAX as usize {
            return Err(Error::InvalidTensor {
                name,
                reason: "name longer than 65535 bytes".into(),
            });
        }
        if self.tensors.contains_key(&name) {
            return Err(Error::DuplicateTensor(name));
        }
        self.tensors.insert(name, tensor);
        Ok(())
    }

    /// Replaces an existing tensor, keeping its position.
    pub fn replace(&mut self, name: &str, tensor: Tensor) -> Result<()> {
        match self.tensors.get_mut(name) {
            Some(slot) => {
                tensor.expect_shape(name, slot.shape())?;
                *slot = tensor;
                Ok(())
            }
            None => Err(Error::MissingTensor(name.to_string())),
        }
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor> {
        self.tensors.shift_remove(name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    /// Looks up `name` and checks its shape.
    pub fn fetch(&self, name: &str, shape: &[usize]) -> Result<Tensor> {
        let t = self
            .tensors
            .get(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))?;
        t.expect_shape(name, shape)?;
        Ok(t.clone())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Number of scalar parameters across all tensors.
    pub fn total_reals(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.total_reals() * 4);
        out.extend_from_slice(WEIGHT_MAGIC);
        out.extend_from_slice(&WEIGHT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.rank() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if bytes.len() < 4 || &bytes[..4] != WEIGHT_MAGIC {
            return Err(Error::BadMagic);
        }
        r.pos = 4;
        let version = r.u32("version")?;
        if version != WEIGHT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let count = r.u32("tensor count")?;
        let mut store = WeightStore::new();
        for i in 0..count {
            let name_len = r.u16(&format!("name length of tensor {i}"))? as usize;
            let raw = r.take(name_len).ok_or_else(|| Error::Truncated(format!("name of tensor {i}")))?;
            let name = std::str::from_utf8(raw)
                .map_err(|_| Error::InvalidTensor {
                    name: format!("#{i}"),
                    reason: "name is not UTF-8".into(),
                })?
                .to_string();
            let rank = r.take(1).ok_or_else(|| Error::TruncatedTensor(name.clone()))?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32(&name).map_err(|_| Error::TruncatedTensor(name.clone()))? as usize);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| Error::InvalidTensor {
                    name: name.clone(),
                    reason: format!("shape {shape:?} overflows"),
                })?;
            let raw = r.take(n).ok_or_else(|| Error::TruncatedTensor(name.clone()))?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            store.insert(name, Tensor::new(shape, data)?)?;
        }
        if r.pos != bytes.len() {
            return Err(Error::TrailingBytes(bytes.len() - r.pos));
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Hex SHA-256 of the canonical little-endian serialization.
    pub fn manifest_hash(&self) -> String {
        let digest = Sha256::digest(self.to_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4).ok_or_else(|| Error::Truncated(what.to_string()))?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2).ok_or_else(|| Error::Truncated(what.to_string()))?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }
}

/// Human-readable listing of names and shapes plus the content hash.
pub fn manifest_json(store: &WeightStore) -> serde_json::Value {
    let tensors: Vec<_> = store
        .iter()
        .map(|(name, t)| json!({ "name": name, "shape": t.shape() }))
        .collect();
    json!({
        "format": "ACNW",
        "version": WEIGHT_VERSION,
        "sha256": store.manifest_hash(),
        "total_reals": store.total_reals(),
        "tensors": tensors,
    })
}
