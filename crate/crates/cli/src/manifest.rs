//! Run manifests: everything needed to repeat a run, plus output hashes.

use std::collections::BTreeMap;
use std::path::Path;

use rovpol::moldata::SystemSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::{RunCommand, Settings};
use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: RunCommand,
    pub settings: Settings,
    /// Fully resolved system configurations the run used.
    pub systems: Vec<SystemSpec>,
    /// SHA-256 of the canonical JSON of version, command, settings and systems.
    pub input_hash: String,
    pub threads: usize,
    pub started: String,
    pub finished: String,
    /// Output path relative to the run directory -> SHA-256.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Hash of the inputs that determine a run's outputs. Keys are sorted, so
/// the hash does not depend on field order or whitespace.
pub fn input_hash(version: &str, command: &RunCommand, settings: &Settings, systems: &[SystemSpec]) -> Result<String> {
    let value = serde_json::json!({
        "version": version,
        "command": command,
        "settings": settings,
        "systems": systems,
    });
    let canonical = serde_json::to_string(&value).map_err(rovpol::Error::from)?;
    Ok(sha256_hex(canonical.as_bytes()))
}

impl RunManifest {
    pub fn new(
        command: RunCommand,
        systems: Vec<SystemSpec>,
        settings: Settings,
        threads: usize,
        started: String,
    ) -> Result<Self> {
        let version = env!("CARGO_PKG_VERSION").to_string();
        let input_hash = input_hash(&version, &command, &settings, &systems)?;
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version,
            command,
            settings,
            systems,
            input_hash,
            threads,
            started,
            finished: String::new(),
            outputs: BTreeMap::new(),
        })
    }

    pub fn recomputed_hash(&self) -> Result<String> {
        input_hash(&self.version, &self.command, &self.settings, &self.systems)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Input {
            path: path.to_path_buf(),
            source,
        })?;
        let manifest: RunManifest =
            serde_json::from_str(&text).map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))?;
        let hash = manifest.recomputed_hash()?;
        if hash != manifest.input_hash {
            return Err(CliError::Manifest(format!(
                "input hash {} does not match recorded {}",
                hash, manifest.input_hash
            )));
        }
        Ok(manifest)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self).map_err(rovpol::Error::from)? + "\n")
    }
}
