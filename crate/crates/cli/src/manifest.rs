//! Run manifests: the resolved config, seed, versions, and wall time
//! persisted alongside every run's results, sufficient to replay the run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ResolvedCommand;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub command: String,
    /// Root seed of the run, when the command consumes randomness.
    pub seed: Option<u64>,
    /// Worker-count hint the run was launched with; informational only,
    /// results never depend on it.
    pub workers: Option<usize>,
    pub config: ResolvedCommand,
    pub outputs: Vec<String>,
    pub wall_time_ms: u64,
    pub created_unix_ms: u64,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(MANIFEST_NAME), json + "\n")
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
