//! Per-stage manifest: the stage's inputs and outputs with SHA-256 hashes
//! and the seeds that produced them. Paths are relative to the artifact root.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "effective_config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub stage: String,
    pub master_seed: u64,
    pub config_sha256: String,
    pub inputs: Vec<ArtifactEntry>,
    pub artifacts: Vec<ArtifactEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Slash-separated path of `path` below `root`.
pub fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Builds a stage manifest while artifacts are written.
pub struct ManifestBuilder {
    root: PathBuf,
    manifest: Manifest,
}

impl ManifestBuilder {
    pub fn new(root: &Path, stage: &str, master_seed: u64, config_toml: &str) -> Self {
        Self {
            root: root.to_path_buf(),
            manifest: Manifest {
                format_version: MANIFEST_VERSION,
                stage: stage.to_string(),
                master_seed,
                config_sha256: sha256_hex(config_toml.as_bytes()),
                inputs: Vec::new(),
                artifacts: Vec::new(),
            },
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let entry = ArtifactEntry {
            path: relative(&self.root, path),
            sha256: hash_file(path)?,
            seed: None,
        };
        self.manifest.inputs.push(entry);
        Ok(())
    }

    pub fn artifact(&mut self, path: &Path, seed: Option<u64>) -> Result<(), CliError> {
        let entry = ArtifactEntry {
            path: relative(&self.root, path),
            sha256: hash_file(path)?,
            seed,
        };
        self.manifest.artifacts.push(entry);
        Ok(())
    }

    /// Write the effective config and the manifest into `dir`.
    pub fn finish(mut self, dir: &Path, config_toml: &str) -> Result<PathBuf, CliError> {
        let cfg_path = dir.join(CONFIG_FILE);
        write_file(&cfg_path, config_toml.as_bytes())?;
        self.artifact(&cfg_path, None)?;
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Compute(e.into()))?;
        write_file(&path, json.as_bytes())?;
        Ok(path)
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Load the manifest of an earlier stage, or report it missing.
pub fn require(root: &Path, stage_dir: &str, stage: &str) -> Result<(PathBuf, Manifest), CliError> {
    let path = root.join(stage_dir).join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(CliError::MissingInput(format!(
            "{} (run `featsel {stage}` first)",
            relative(root, &path)
        )));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Compute(featsel_core::Error::Schema(format!("{}: {e}", path.display()))))?;
    if m.format_version != MANIFEST_VERSION {
        return Err(CliError::Compute(featsel_core::Error::Schema(format!(
            "{}: unsupported manifest version {}",
            path.display(),
            m.format_version
        ))));
    }
    for a in &m.artifacts {
        let p = root.join(&a.path);
        if !p.is_file() {
            return Err(CliError::MissingInput(format!(
                "{} (listed in {})",
                a.path,
                relative(root, &path)
            )));
        }
    }
    Ok((path, m))
}
