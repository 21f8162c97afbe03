//! Output directory handling and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn file_digest(path: &Path) -> Result<String, CliError> {
    fs::read(path)
        .map(|b| sha256_hex(&b))
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: Option<u64>,
    sub_seeds: &'a BTreeMap<String, u64>,
    config_digest: String,
    config: &'a str,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
    extra: &'a serde_json::Value,
}

/// Collects files written under one output directory and finishes with a
/// `manifest.json` listing inputs, outputs and the effective configuration.
pub struct RunDir {
    root: PathBuf,
    command: String,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
    pub seed: Option<u64>,
    pub sub_seeds: BTreeMap<String, u64>,
    pub config: String,
    pub extra: serde_json::Value,
}

impl RunDir {
    pub fn create(root: PathBuf, command: &str) -> Result<Self, CliError> {
        fs::create_dir_all(&root).map_err(|e| CliError::Config(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self {
            root,
            command: command.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
            sub_seeds: BTreeMap::new(),
            config: String::new(),
            extra: serde_json::Value::Null,
        })
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let p = self.root.join(name);
        fs::write(&p, bytes).map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display())))?;
        self.outputs.push(name.to_string());
        Ok(p)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write(name, text)
    }

    pub fn finish(self) -> Result<PathBuf, CliError> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| {
                Ok(FileEntry {
                    path: p.display().to_string(),
                    sha256: file_digest(p)?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let outputs = self
            .outputs
            .iter()
            .map(|n| {
                Ok(FileEntry {
                    path: n.clone(),
                    sha256: file_digest(&self.root.join(n))?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let manifest = Manifest {
            tool: "crashsynth",
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            seed: self.seed,
            sub_seeds: &self.sub_seeds,
            config_digest: sha256_hex(self.config.as_bytes()),
            config: &self.config,
            inputs,
            outputs,
            extra: &self.extra,
        };
        let p = self.root.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).expect("serializable");
        text.push('\n');
        fs::write(&p, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display())))?;
        Ok(p)
    }
}
