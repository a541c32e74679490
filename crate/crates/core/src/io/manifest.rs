//! Reproducibility manifest written next to every output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RunConfig;
use crate::error::{Error, Result};

pub const MANIFEST_SUFFIX: &str = ".manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Role (`parcels`, `cities`, ...) to file digest.
    pub inputs: BTreeMap<String, InputDigest>,
    pub outputs: BTreeMap<String, InputDigest>,
    pub config: RunConfig,
    /// Left out unless requested so that reruns stay byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
}

pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// `out.geojson` -> `out.geojson.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(MANIFEST_SUFFIX);
    PathBuf::from(s)
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        RunManifest {
            tool: "urbanca".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: config.seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            config: config.clone(),
            created_at: None,
        }
    }

    pub fn add_input(&mut self, role: &str, path: &Path) -> Result<()> {
        let d = InputDigest { path: path.display().to_string(), sha256: file_sha256(path)? };
        self.inputs.insert(role.into(), d);
        Ok(())
    }

    /// Outputs are recorded by file name, since they sit next to the manifest.
    pub fn add_output(&mut self, role: &str, path: &Path) -> Result<()> {
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        let d = InputDigest { path: name, sha256: file_sha256(path)? };
        self.outputs.insert(role.into(), d);
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// Writes the manifest next to `output` and returns its path.
    pub fn write_for(&self, output: &Path) -> Result<PathBuf> {
        let p = manifest_path(output);
        super::features::write_text(&p, &self.to_json())?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::schema(path.display().to_string(), e.to_string()))
    }

    /// Roles whose file no longer matches the recorded digest. Output names
    /// are resolved against `output_dir`.
    pub fn verify(&self, output_dir: &Path) -> Result<Vec<String>> {
        let mut changed = Vec::new();
        for (role, d) in &self.inputs {
            if file_sha256(&d.path)? != d.sha256 {
                changed.push(role.clone());
            }
        }
        for (role, d) in &self.outputs {
            if file_sha256(output_dir.join(&d.path))? != d.sha256 {
                changed.push(role.clone());
            }
        }
        Ok(changed)
    }
}
