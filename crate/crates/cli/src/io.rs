//! File digests, atomic output and run manifests.

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use tempfile::NamedTempFile;

/// An input file read fully into memory along with its SHA-256.
pub struct Input {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
    pub sha256: String,
}

impl Input {
    pub fn read(path: &Path) -> Result<Input> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let sha256 = hex::encode(Sha256::digest(&bytes));
        Ok(Input {
            path: path.to_owned(),
            bytes,
            sha256,
        })
    }
}

/// Output files staged next to their destinations and moved into place only
/// by [`Outputs::commit`]. Dropping without committing removes the staged files.
#[derive(Default)]
pub struct Outputs {
    staged: Vec<(NamedTempFile, PathBuf)>,
}

impl Outputs {
    pub fn stage(&mut self, dest: &Path, contents: &[u8]) -> Result<()> {
        let dir = match dest.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = NamedTempFile::new_in(dir)
            .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
        tmp.write_all(contents)
            .and_then(|_| tmp.flush())
            .with_context(|| format!("writing {}", dest.display()))?;
        self.staged.push((tmp, dest.to_owned()));
        Ok(())
    }

    pub fn stage_json<T: Serialize>(&mut self, dest: &Path, value: &T) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.stage(dest, &text)
    }

    pub fn commit(self) -> Result<()> {
        for (tmp, dest) in self.staged {
            tmp.persist(&dest)
                .with_context(|| format!("moving output into {}", dest.display()))?;
        }
        Ok(())
    }
}

/// Everything needed to reproduce a run. Contains no timestamps, so two runs
/// with the same inputs and flags produce the same manifest.
#[derive(Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: serde_json::Value,
    /// SHA-256 of each input file, by role.
    pub inputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new<C: Serialize>(subcommand: &'static str, seed: u64, config: &C) -> Result<Self> {
        Ok(RunManifest {
            subcommand,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config: serde_json::to_value(config)?,
            inputs: BTreeMap::new(),
        })
    }

    pub fn input(&mut self, role: &str, input: &Input) {
        self.inputs.insert(role.to_owned(), input.sha256.clone());
    }
}

/// `<out>.manifest.json` unless overridden.
pub fn manifest_path(explicit: Option<&Path>, out: &Path) -> PathBuf {
    explicit.map(Path::to_owned).unwrap_or_else(|| {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        out.with_file_name(name)
    })
}
