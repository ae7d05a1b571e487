//! Run manifests. The manifest is written with status "failed" before any
//! result, and flipped to "ok" only once every output is on disk, so an
//! interrupted run never looks successful.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize)]
pub struct Versions {
    pub lnn_cli: &'static str,
    pub lnn_core: &'static str,
    pub lnn_wireless: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub status: String,
    pub config_hash: String,
    pub seed: u64,
    pub versions: Versions,
    pub started_unix_s: u64,
    pub finished_unix_s: Option<u64>,
    pub outputs: Vec<String>,
    pub error: Option<String>,
    /// Canonical rendering of the config the run used.
    pub config: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub struct ManifestWriter {
    path: PathBuf,
    manifest: Manifest,
}

impl ManifestWriter {
    /// Writes the initial manifest for `command` into `out_dir`.
    pub fn begin(out_dir: &Path, command: &str, rendered_config: &str, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        let w = Self {
            path: out_dir.join(format!("manifest_{command}.json")),
            manifest: Manifest {
                command: command.to_string(),
                status: "failed".into(),
                config_hash: sha256_hex(rendered_config.as_bytes()),
                seed,
                versions: Versions {
                    lnn_cli: env!("CARGO_PKG_VERSION"),
                    lnn_core: lnn_core::VERSION,
                    lnn_wireless: lnn_wireless::VERSION,
                },
                started_unix_s: now(),
                finished_unix_s: None,
                outputs: Vec::new(),
                error: Some("run did not finish".into()),
                config: rendered_config.to_string(),
            },
        };
        w.write()?;
        Ok(w)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn write(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(&self.path, text + "\n").with_context(|| format!("writing {}", self.path.display()))
    }

    pub fn finish_ok(mut self, outputs: Vec<String>) -> Result<()> {
        self.manifest.status = "ok".into();
        self.manifest.error = None;
        self.manifest.outputs = outputs;
        self.manifest.finished_unix_s = Some(now());
        self.write()
    }

    pub fn finish_failed(mut self, error: &str) -> Result<()> {
        self.manifest.error = Some(error.to_string());
        self.manifest.finished_unix_s = Some(now());
        self.write()
    }
}
