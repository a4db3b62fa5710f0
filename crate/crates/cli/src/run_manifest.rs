use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const RUN_MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Record of one artifact-producing invocation, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub args: Vec<String>,
    pub tool_version: String,
    /// Effective configuration after merging flags, file and defaults.
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seeds: Vec<u64>,
    /// Unix seconds.
    pub started_at: u64,
    pub finished_at: u64,
}

pub fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, started_at: u64) -> Self {
        Self {
            schema_version: RUN_MANIFEST_SCHEMA_VERSION,
            command: command.to_string(),
            args: std::env::args().collect(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seeds: Vec::new(),
            started_at,
            finished_at: started_at,
        }
    }

    /// `responses.jsonl` gets `responses.run.json`; a directory gets `<command>.run.json`
    /// inside it.
    pub fn path_for(output: &Path, command: &str) -> PathBuf {
        if output.is_dir() {
            return output.join(format!("{command}.run.json"));
        }
        let stem = output
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "output".into());
        output.with_file_name(format!("{stem}.run.json"))
    }

    pub fn write(mut self, output: &Path) -> Result<PathBuf> {
        self.finished_at = now();
        let path = Self::path_for(output, &self.command);
        let text = serde_json::to_string_pretty(&self)?;
        std::fs::write(&path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
