//! Artifact writing and the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// Version of the JSON artifact layout.
pub const SCHEMA: u32 = 1;

pub const MANIFEST_FILE: &str = "manifest.json";

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Serialize)]
struct ArtifactEntry {
    file: String,
    sha256: String,
}

/// Collects the artifacts of one command and writes the manifest at the end.
///
/// The manifest hash is the SHA-256 of the command, the canonical config echo
/// and the crate versions. It does not depend on timing, so JSON artifacts
/// stay byte-identical across repeated runs.
pub struct Run {
    command: String,
    echo: String,
    seed: u64,
    dir: PathBuf,
    hash: String,
    start: Instant,
    artifacts: Vec<ArtifactEntry>,
}

impl Run {
    pub fn start(command: &str, cfg: &ExperimentConfig) -> Result<Self> {
        let echo = cfg.echo();
        let identity = format!(
            "{command}\n{echo}plap-cli {}\nplap-core {}\n",
            env!("CARGO_PKG_VERSION"),
            plap_core::VERSION
        );
        std::fs::create_dir_all(&cfg.out)
            .with_context(|| format!("creating output directory {}", cfg.out.display()))?;
        Ok(Run {
            command: command.to_string(),
            echo,
            seed: cfg.seed,
            dir: cfg.out.clone(),
            hash: hex_digest(identity.as_bytes()),
            start: Instant::now(),
            artifacts: Vec::new(),
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    fn record(&mut self, file: &str) -> Result<()> {
        let bytes = std::fs::read(self.path(file))
            .with_context(|| format!("reading back artifact {file}"))?;
        self.artifacts.push(ArtifactEntry {
            file: file.to_string(),
            sha256: hex_digest(&bytes),
        });
        Ok(())
    }

    /// Writes `report` as JSON with `schema` and `manifest` fields added and
    /// returns the written value.
    pub fn json(&mut self, file: &str, report: &impl Serialize) -> Result<Value> {
        let mut map = match serde_json::to_value(report)? {
            Value::Object(m) => m,
            other => {
                let mut m = Map::new();
                m.insert("data".into(), other);
                m
            }
        };
        map.insert("schema".into(), json!(SCHEMA));
        map.insert("manifest".into(), json!(self.hash));
        let value = Value::Object(map);
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        std::fs::write(self.path(file), text).with_context(|| format!("writing {file}"))?;
        self.record(file)?;
        Ok(value)
    }

    /// Runs `write` on the artifact path and records the file.
    pub fn csv(
        &mut self,
        file: &str,
        write: impl FnOnce(&Path) -> plap_core::Result<()>,
    ) -> Result<()> {
        write(&self.path(file)).with_context(|| format!("writing {file}"))?;
        self.record(file)
    }

    /// Writes the manifest with config echo, versions, seed, wall time and
    /// the SHA-256 of each artifact.
    pub fn finish(self, status: &str) -> Result<PathBuf> {
        let manifest = json!({
            "schema": SCHEMA,
            "hash": self.hash,
            "command": self.command,
            "config": self.echo,
            "versions": {
                "plap-cli": env!("CARGO_PKG_VERSION"),
                "plap-core": plap_core::VERSION,
            },
            "seed": self.seed,
            "wall_seconds": self.start.elapsed().as_secs_f64(),
            "status": status,
            "artifacts": self.artifacts,
        });
        let path = self.path(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
