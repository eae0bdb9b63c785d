//! Timestamped run directories and their manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::Utc;
use fiberzs_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, ExperimentConfig};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub started_utc: String,
    pub wall_clock_s: f64,
    /// Set when the command failed after the directory was created.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        serde_json::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", dir.join(MANIFEST).display())))
    }

    /// Files whose checksum no longer matches.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for f in &self.files {
            let data = fs::read(dir.join(&f.path))?;
            if hex(&Sha256::digest(&data)) != f.sha256 {
                bad.push(f.path.clone());
            }
        }
        Ok(bad)
    }
}

/// A fresh output directory. Files are only ever created, never rewritten.
pub struct RunDir {
    pub path: PathBuf,
    command: String,
    config_hash: String,
    seed: u64,
    started: Instant,
    started_utc: String,
    files: Vec<FileEntry>,
}

impl RunDir {
    pub fn create(cfg: &ExperimentConfig, command: &str) -> Result<Self> {
        let now = Utc::now();
        let stamp = now.format("%Y%m%dT%H%M%S%.3fZ");
        fs::create_dir_all(&cfg.run.output_dir)?;
        let base = format!("{}-{}-{}", cfg.run.name, command, stamp);
        let mut path = cfg.run.output_dir.join(&base);
        let mut k = 1;
        loop {
            match fs::create_dir(&path) {
                Ok(()) => break,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    path = cfg.run.output_dir.join(format!("{base}-{k}"));
                    k += 1;
                }
                Err(e) => return Err(e.into()),
            }
        }
        let mut dir = RunDir {
            path,
            command: command.to_string(),
            config_hash: cfg.hash(),
            seed: cfg.run.seed,
            started: Instant::now(),
            started_utc: now.to_rfc3339(),
            files: Vec::new(),
        };
        dir.write("config.toml", cfg.to_toml())?;
        Ok(dir)
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let data = contents.as_ref();
        let path = self.path.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut f = fs::OpenOptions::new().write(true).create_new(true).open(&path)?;
        std::io::Write::write_all(&mut f, data)?;
        self.files.push(FileEntry { path: name.to_string(), bytes: data.len() as u64, sha256: hex(&Sha256::digest(data)) });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))?;
        self.write(name, text + "\n")
    }

    pub fn finish(self) -> Result<(PathBuf, RunManifest)> {
        self.close(None)
    }

    pub fn fail(self, error: &Error) -> Result<(PathBuf, RunManifest)> {
        self.close(Some(error.to_string()))
    }

    fn close(self, error: Option<String>) -> Result<(PathBuf, RunManifest)> {
        let m = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            config_hash: self.config_hash,
            seed: self.seed,
            threads: rayon::current_num_threads(),
            started_utc: self.started_utc,
            wall_clock_s: self.started.elapsed().as_secs_f64(),
            error,
            files: self.files,
        };
        let text = serde_json::to_string_pretty(&m).map_err(|e| Error::Numerical(e.to_string()))?;
        fs::write(self.path.join(MANIFEST), text + "\n")?;
        Ok((self.path, m))
    }
}
