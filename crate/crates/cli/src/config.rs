//! Config file handling. Values from flags override the file, which overrides defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use frame_eval::geometry::Boundary;
use frame_eval::harness::EndpointConfig;
use frame_eval::testgen::GenerationConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub strict: Option<bool>,
    pub sequential: Option<bool>,
    /// Translation bundle file overlaid on the built-in English bundle.
    pub bundle: Option<PathBuf>,
    pub generation: Option<GenerationConfig>,
    pub query: QueryFile,
    pub eval: EvalFile,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueryFile {
    pub endpoint: Option<EndpointConfig>,
    pub oracle: Option<String>,
    pub noise: Option<f64>,
    pub baseline: Option<String>,
    pub images: Option<PathBuf>,
    pub probes: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalFile {
    pub candidates: Option<Vec<String>>,
    pub acc_boundary: Option<Boundary>,
    pub hemi_boundary: Option<Boundary>,
    pub threshold: Option<f64>,
    pub formats: Option<Vec<String>>,
}

impl FileConfig {
    /// Reads TOML or JSON, chosen by extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let parsed = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(anyhow::Error::from),
            Some("toml") | None => toml::from_str(&text).map_err(anyhow::Error::from),
            Some(other) => bail!("unsupported config extension `.{other}` (use .toml or .json)"),
        };
        parsed.with_context(|| format!("parsing config {}", path.display()))
    }
}
