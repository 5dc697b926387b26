//! Output directory: CSV tables, JSON reports, a summary and a manifest of
//! SHA-256 hashes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(|v| fmt(*v)))?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv: {e}"))?;
        self.write(name, &bytes)
    }

    /// Pretty JSON with keys in sorted order.
    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let v = serde_json::to_value(value)?;
        let mut text = serde_json::to_string_pretty(&v)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        self.write(name, body.as_bytes())
    }

    /// Writes manifest.json listing every other file with its hash.
    pub fn finish(mut self) -> Result<PathBuf> {
        let mut hashes = BTreeMap::new();
        for name in &self.files {
            let bytes = fs::read(self.dir.join(name))?;
            hashes.insert(name.clone(), format!("{:x}", Sha256::digest(&bytes)));
        }
        let manifest = serde_json::json!({ "files": hashes });
        self.json("manifest.json", &manifest)?;
        Ok(self.dir)
    }
}
