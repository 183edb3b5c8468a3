//! Output directory with a checksum manifest.

use std::path::PathBuf;

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use nbbm_core::rng::SEED_DERIVATION;

#[derive(Debug, Clone, Serialize)]
struct FileEntry {
    name: String,
    bytes: usize,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed_derivation: &'a str,
    files: &'a [FileEntry],
}

/// Files are written one at a time and recorded in write order.
pub struct OutDir {
    path: PathBuf,
    files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl OutDir {
    pub fn create(path: PathBuf) -> anyhow::Result<Self> {
        std::fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self { path, files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> anyhow::Result<()> {
        let p = self.path.join(name);
        std::fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        self.files.push(FileEntry {
            name: name.into(),
            bytes: contents.len(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, &s)
    }

    /// Write `manifest.json` covering every file written so far.
    pub fn finish(self, command: &str) -> anyhow::Result<()> {
        let m = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed_derivation: SEED_DERIVATION,
            files: &self.files,
        };
        let mut s = serde_json::to_string_pretty(&m)?;
        s.push('\n');
        let p = self.path.join("manifest.json");
        std::fs::write(&p, s).with_context(|| format!("writing {}", p.display()))?;
        Ok(())
    }
}
