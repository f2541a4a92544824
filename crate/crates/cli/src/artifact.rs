//! Output files, metadata headers and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const ARTIFACT: &str = "areatail";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST: &str = "run.json";

/// One output file held in memory until the run completes.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn text(name: impl Into<String>, text: String) -> Self {
        Self {
            name: name.into(),
            bytes: text.into_bytes(),
        }
    }

    pub fn json(name: impl Into<String>, value: &serde_json::Value) -> Self {
        let mut text = serde_json::to_string_pretty(value).expect("json serializes");
        text.push('\n');
        Self::text(name, text)
    }
}

/// Header embedded in every output file.
pub fn meta(command: &str, config: &ExperimentConfig) -> serde_json::Value {
    serde_json::json!({
        "artifact": ARTIFACT,
        "version": VERSION,
        "command": command,
        "config": config,
    })
}

/// Prefixes a CSV body with the metadata as `#` comment lines.
pub fn with_meta(meta: &serde_json::Value, body: &str) -> String {
    let mut out = String::new();
    for line in serde_json::to_string_pretty(meta).expect("json serializes").lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str(body);
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact: String,
    pub version: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig, artifacts: &[Artifact]) -> Self {
        Self {
            artifact: ARTIFACT.into(),
            version: VERSION.into(),
            command: command.into(),
            config: config.clone(),
            files: artifacts
                .iter()
                .map(|a| FileEntry {
                    name: a.name.clone(),
                    sha256: sha256_hex(&a.bytes),
                    bytes: a.bytes.len() as u64,
                })
                .collect(),
        }
    }

    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))
    }
}

/// Writes the artifacts and their manifest into `dir`, first removing the
/// files listed by a manifest already there.
pub fn write_all(dir: &Path, command: &str, config: &ExperimentConfig, artifacts: &[Artifact]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    if let Ok(previous) = Manifest::load(dir) {
        for f in previous.files {
            let _ = fs::remove_file(dir.join(f.name));
        }
    }
    for a in artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.bytes).map_err(|e| CliError::io(&path, e))?;
    }
    let manifest = Manifest::new(command, config, artifacts);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    let path = dir.join(MANIFEST);
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}
