use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use scbf_core::io::write_atomic;
use scbf_core::SynthesisConfig;

/// Hex SHA-256 of the effective configuration in canonical JSON form.
pub fn config_hash(cfg: &SynthesisConfig) -> Result<String> {
    let canonical = serde_json::to_vec(cfg)?;
    Ok(Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    args: Vec<String>,
    created: String,
    config_hash: Option<&'a str>,
    config: Option<&'a SynthesisConfig>,
    seeds: &'a serde_json::Value,
    outputs: &'a [String],
}

/// Output directory of one invocation, `<base>/<timestamp>-<hash prefix>`.
pub struct RunDir {
    path: PathBuf,
    command: String,
    config: Option<SynthesisConfig>,
    hash: Option<String>,
    seeds: serde_json::Value,
    outputs: Vec<String>,
}

impl RunDir {
    pub fn create(base: &Path, command: &str, config: Option<&SynthesisConfig>) -> Result<Self> {
        let hash = config.map(config_hash).transpose()?;
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
        let name = match &hash {
            Some(h) => format!("{stamp}-{}-{}", command, &h[..12]),
            None => format!("{stamp}-{command}"),
        };
        let path = base.join(name);
        std::fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self {
            path,
            command: command.to_string(),
            config: config.cloned(),
            hash,
            seeds: serde_json::Value::Null,
            outputs: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn set_seeds(&mut self, seeds: serde_json::Value) {
        self.seeds = seeds;
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.path.join(name);
        write_atomic(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        self.outputs.push(name.to_string());
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value)?;
        self.write(name, text.as_bytes())
    }

    /// Records a file that some other routine already wrote into the directory.
    pub fn note(&mut self, path: &Path) {
        if let Ok(rel) = path.strip_prefix(&self.path) {
            self.outputs.push(rel.display().to_string());
        }
    }

    pub fn finish(self) -> Result<PathBuf> {
        let manifest = Manifest {
            tool: "scbf",
            version: scbf_core::pipeline::VERSION,
            command: &self.command,
            args: std::env::args().collect(),
            created: chrono::Utc::now().to_rfc3339(),
            config_hash: self.hash.as_deref(),
            config: self.config.as_ref(),
            seeds: &self.seeds,
            outputs: &self.outputs,
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        write_atomic(&self.path.join("manifest.json"), text.as_bytes())?;
        Ok(self.path)
    }
}
