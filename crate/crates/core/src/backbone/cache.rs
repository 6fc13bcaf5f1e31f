//! Binary feature cache.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        "LUSF"
//! version      u32
//! backbone_id  u32 byte length + UTF-8
//! fingerprint  32 bytes
//! feature_dim  u32
//! count        u64
//! count × { image_id: u32 byte length + UTF-8, copy: u32, feature_dim × f32 }
//! ```
//!
//! Records are written sorted by (image_id, copy) so identical contents give
//! identical bytes.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{BackboneError, Fingerprint};
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 4] = b"LUSF";
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCache {
    backbone_id: String,
    fingerprint: Fingerprint,
    feature_dim: usize,
    entries: BTreeMap<(String, u32), Vec<f32>>,
}

impl FeatureCache {
    pub fn new(backbone_id: impl Into<String>, fingerprint: Fingerprint, feature_dim: usize) -> Self {
        FeatureCache {
            backbone_id: backbone_id.into(),
            fingerprint,
            feature_dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn backbone_id(&self) -> &str {
        &self.backbone_id
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, image_id: &str, copy: u32) -> bool {
        self.entries.contains_key(&(image_id.to_string(), copy))
    }

    pub fn get(&self, image_id: &str, copy: u32) -> Option<&[f32]> {
        self.entries
            .get(&(image_id.to_string(), copy))
            .map(Vec::as_slice)
    }

    pub fn insert(&mut self, image_id: impl Into<String>, copy: u32, values: Vec<f32>) -> Result<(), BackboneError> {
        let image_id = image_id.into();
        if values.len() != self.feature_dim {
            return Err(BackboneError::Cache(format!(
                "{image_id:?}: vector has {} values, cache holds {}",
                values.len(),
                self.feature_dim
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BackboneError::Cache(format!(
                "{image_id:?}: non-finite feature value"
            )));
        }
        self.entries.insert((image_id, copy), values);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32, &[f32])> {
        self.entries
            .iter()
            .map(|((id, c), v)| (id.as_str(), *c, v.as_slice()))
    }

    /// Same backbone identity and fingerprint as `other`.
    pub fn compatible_with(&self, backbone_id: &str, fingerprint: &Fingerprint, feature_dim: usize) -> bool {
        self.backbone_id == backbone_id
            && &self.fingerprint == fingerprint
            && self.feature_dim == feature_dim
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        write_str(w, &self.backbone_id)?;
        w.write_all(&self.fingerprint)?;
        w.write_all(&(self.feature_dim as u32).to_le_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for ((id, copy), values) in &self.entries {
            write_str(w, id)?;
            w.write_all(&copy.to_le_bytes())?;
            for v in values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, BackboneError> {
        let bad = |what: &str| BackboneError::Cache(format!("truncated or corrupt file ({what})"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| bad("magic"))?;
        if &magic != CACHE_MAGIC {
            return Err(BackboneError::Cache("bad magic, not a feature cache".into()));
        }
        let version = read_u32(r).map_err(|_| bad("version"))?;
        if version != CACHE_VERSION {
            return Err(BackboneError::Cache(format!(
                "unsupported cache version {version}"
            )));
        }
        let backbone_id = read_str(r).map_err(|_| bad("backbone id"))?;
        let mut fingerprint = [0u8; 32];
        r.read_exact(&mut fingerprint).map_err(|_| bad("fingerprint"))?;
        let feature_dim = read_u32(r).map_err(|_| bad("feature_dim"))? as usize;
        let count = read_u64(r).map_err(|_| bad("record count"))?;

        let mut cache = FeatureCache::new(backbone_id, fingerprint, feature_dim);
        let mut buf = vec![0u8; feature_dim * 4];
        for _ in 0..count {
            let id = read_str(r).map_err(|_| bad("image id"))?;
            let copy = read_u32(r).map_err(|_| bad("copy index"))?;
            r.read_exact(&mut buf).map_err(|_| bad("feature values"))?;
            let values = buf
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            cache.insert(id, copy, values)?;
        }
        Ok(cache)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::read_from(&mut bytes.as_slice())?)
    }

    /// Writes to a sibling temporary file and renames it into place, so
    /// readers never see a partial cache.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("lusf.partial");
        std::fs::write(&tmp, self.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_str(r: &mut impl Read) -> std::io::Result<String> {
    let len = read_u32(r)? as usize;
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}
