use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use prosail_tvae::spectral::Assets;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> CliResult<Self> {
        let bytes = read(path)?;
        Ok(Self::of_bytes(path, &bytes))
    }

    pub fn of_bytes(path: &Path, bytes: &[u8]) -> Self {
        Self { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(bytes)) }
    }
}

/// Side-car written next to every artifact as `<artifact>.manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub seed: Option<u64>,
    pub config_sha256: String,
    /// The merged configuration with every default filled in.
    pub config: String,
    pub asset_origin: String,
    pub asset_checksums: BTreeMap<String, String>,
    pub inputs: Vec<FileDigest>,
    pub output: FileDigest,
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, cfg: &RunConfig, assets: &Assets, output: FileDigest) -> Self {
        Self {
            command: command.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_sha256: cfg.sha256(),
            config: cfg.to_toml(),
            asset_origin: assets.origin.clone(),
            asset_checksums: assets.checksums.clone(),
            inputs: Vec::new(),
            output,
            summary: serde_json::Value::Null,
        }
    }

    pub fn path_for(artifact: &Path) -> PathBuf {
        let mut p = artifact.as_os_str().to_owned();
        p.push(".manifest.json");
        PathBuf::from(p)
    }

    pub fn write(&self) -> CliResult<PathBuf> {
        let path = Self::path_for(Path::new(&self.output.path));
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        write(&path, text.as_bytes())?;
        Ok(path)
    }
}

pub fn read(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Failed(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}
