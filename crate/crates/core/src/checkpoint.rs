//! SPCK checkpoint container: named matrices plus a JSON manifest.
//!
//! Layout: `b"SPCK"`, version `u32`, manifest length `u64`, the UTF-8 JSON
//! manifest `{"meta": ..., "tensors": [names]}`, then one SPCM blob per
//! tensor in manifest order. All integers are little-endian.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Result, SpectraError};
use crate::matrix::io::{write_spcm, OffsetReader};
use crate::matrix::DenseMatrix;

pub const SPCK_MAGIC: [u8; 4] = *b"SPCK";
pub const SPCK_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Manifest {
    meta: Map<String, Value>,
    tensors: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    /// Free-form scalar metadata.
    pub meta: Map<String, Value>,
    pub tensors: BTreeMap<String, DenseMatrix>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, m: DenseMatrix) {
        self.tensors.insert(name.into(), m);
    }

    pub fn tensor(&self, name: &str) -> Result<&DenseMatrix> {
        self.tensors.get(name).ok_or_else(|| SpectraError::Format(format!("checkpoint has no tensor named '{name}'")))
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Serialize) -> Result<()> {
        self.meta.insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn meta_as<T: for<'de> Deserialize<'de>>(&self, key: &str) -> Result<T> {
        let v = self
            .meta
            .get(key)
            .ok_or_else(|| SpectraError::Format(format!("checkpoint manifest is missing '{key}'")))?;
        Ok(serde_json::from_value(v.clone())?)
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        let manifest = Manifest { meta: self.meta.clone(), tensors: self.tensors.keys().cloned().collect() };
        let json = serde_json::to_vec(&manifest)?;
        w.write_all(&SPCK_MAGIC)?;
        w.write_all(&SPCK_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for m in self.tensors.values() {
            write_spcm(w, m)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let mut r = OffsetReader::new(r, 0);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != SPCK_MAGIC {
            return Err(SpectraError::Format(format!("not a checkpoint: bad magic {magic:?}")));
        }
        let version = r.read_u32()?;
        if version != SPCK_VERSION {
            return Err(SpectraError::Format(format!(
                "unsupported checkpoint version {version} (expected {SPCK_VERSION})"
            )));
        }
        let len = r.read_u64()?;
        if len > 1 << 30 {
            return Err(SpectraError::Format(format!("implausible manifest length {len}")));
        }
        let mut json = vec![0u8; len as usize];
        r.read_exact(&mut json)?;
        let manifest: Manifest = serde_json::from_slice(&json)?;
        let mut tensors = BTreeMap::new();
        for name in manifest.tensors {
            let m = r.read_spcm()?;
            if tensors.insert(name.clone(), m).is_some() {
                return Err(SpectraError::Format(format!("duplicate tensor '{name}' in checkpoint")));
            }
        }
        Ok(Self { meta: manifest.meta, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        // Write-then-rename so an interrupted save never leaves a torn file.
        let tmp = path.with_extension("spck.tmp");
        std::fs::write(&tmp, self.to_bytes())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read(&mut bytes.as_slice())
    }
}
