//! Output directory with a checksummed manifest of everything written.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    config_hash: &'a str,
    tool_version: &'a str,
    files: &'a [ManifestEntry],
}

#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl OutputDir {
    /// Create `root`; an existing directory is an error unless `force`,
    /// in which case it is replaced.
    pub fn create(root: impl Into<PathBuf>, force: bool) -> Result<Self> {
        let root = root.into();
        if root.exists() {
            if !force {
                return Err(LabError::OutputExists(root));
            }
            std::fs::remove_dir_all(&root).map_err(|e| LabError::io(format!("clearing {}", root.display()), e))?;
        }
        std::fs::create_dir_all(&root).map_err(|e| LabError::io(format!("creating {}", root.display()), e))?;
        Ok(Self { root, entries: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Write `bytes` to `rel` and record it in the manifest.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| LabError::io(format!("creating {}", parent.display()), e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| LabError::io(format!("writing {}", path.display()), e))?;
        self.record(rel, bytes);
        Ok(())
    }

    /// Record a file some other writer already produced under the root.
    pub fn register(&mut self, rel: &str) -> Result<()> {
        let path = self.path(rel);
        let bytes = std::fs::read(&path).map_err(|e| LabError::io(format!("reading {}", path.display()), e))?;
        self.record(rel, &bytes);
        Ok(())
    }

    fn record(&mut self, rel: &str, bytes: &[u8]) {
        self.entries.retain(|e| e.path != rel);
        self.entries.push(ManifestEntry {
            path: rel.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
    }

    pub fn write_csv(&mut self, rel: &str, table: &Table) -> Result<()> {
        self.write(rel, &table.to_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(spectra_core::SpectraError::from)?;
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    /// Write `manifest.json` listing every recorded file, sorted by path.
    pub fn finish(mut self, experiment: &str, config_hash: &str) -> Result<Vec<ManifestEntry>> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest =
            Manifest { experiment, config_hash, tool_version: env!("CARGO_PKG_VERSION"), files: &self.entries };
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(spectra_core::SpectraError::from)?;
        bytes.push(b'\n');
        let path = self.path("manifest.json");
        std::fs::write(&path, bytes).map_err(|e| LabError::io(format!("writing {}", path.display()), e))?;
        Ok(self.entries)
    }
}

/// In-memory CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory csv");
        for r in &self.rows {
            w.write_record(r).expect("in-memory csv");
        }
        w.into_inner().expect("in-memory csv")
    }
}

/// Shortest round-trip formatting; empty for missing values.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn fmt_u(x: Option<u64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_existing_dir_without_force() {
        let tmp = tempfile::tempdir().unwrap();
        let err = OutputDir::create(tmp.path(), false).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let mut out = OutputDir::create(tmp.path().join("x"), false).unwrap();
        out.write("a/b.txt", b"hi").unwrap();
        let mut out2 = OutputDir::create(tmp.path().join("x"), true).unwrap();
        assert!(!out2.path("a/b.txt").exists());
        out2.write("c.txt", b"hello").unwrap();
        let entries = out2.finish("train", "abc").unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].sha256, "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824");
    }

    #[test]
    fn table_quotes_and_orders() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["x,y".into(), fmt_opt(None)]);
        assert_eq!(String::from_utf8(t.to_bytes()).unwrap(), "a,b\n\"x,y\",\n");
    }
}
