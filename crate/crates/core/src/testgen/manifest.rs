use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompts::{hallucination_probes, render_prompt, BundleError, Probe, Translations};
use super::{build_scene, distinct_scenes, enumerate_cases, GenerationConfig, GenerationError};
use super::{SceneSpec, TestCase};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("unsupported manifest schema version {0}")]
    SchemaVersion(u32),
    #[error("manifest references unknown scene `{0}`")]
    DanglingScene(String),
    #[error("manifest I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest JSON: {0}")]
    Parse(#[from] serde_json::Error),
}

/// One suite: the effective configuration, every positioned scene, the cases that query
/// them and the object-existence probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config: GenerationConfig,
    pub scenes: Vec<SceneSpec>,
    pub cases: Vec<TestCase>,
    #[serde(default)]
    pub probes: Vec<Probe>,
}

impl Manifest {
    /// Enumerates, positions and phrases a full suite. Fails early if any case cannot be
    /// phrased in its language.
    pub fn generate(
        config: &GenerationConfig,
        translations: &Translations,
    ) -> Result<Self, ManifestError> {
        let cases = enumerate_cases(config)?;
        let scenes = distinct_scenes(&cases)
            .into_iter()
            .map(|key| build_scene(key, config))
            .collect::<Result<Vec<_>, _>>()?;
        let mut probes = Vec::with_capacity(scenes.len() * 2 * config.languages.len());
        for language in &config.languages {
            let bundle = translations.get(language)?;
            for scene in &scenes {
                let (present, absent) = hallucination_probes(scene, bundle, &config.decoys)?;
                probes.push(present);
                probes.push(absent);
            }
        }
        let manifest = Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            config: config.clone(),
            scenes,
            cases,
            probes,
        };
        manifest.prompts(translations)?;
        Ok(manifest)
    }

    pub fn scene_index(&self) -> HashMap<&str, &SceneSpec> {
        self.scenes.iter().map(|s| (s.id.as_str(), s)).collect()
    }

    /// `(case id, prompt)` for every case, in case order.
    pub fn prompts(
        &self,
        translations: &Translations,
    ) -> Result<Vec<(String, String)>, ManifestError> {
        let scenes = self.scene_index();
        self.cases
            .iter()
            .map(|case| {
                let scene_id = case.scene.id();
                let scene = scenes
                    .get(scene_id.as_str())
                    .ok_or(ManifestError::DanglingScene(scene_id))?;
                let bundle = translations.get(&case.language)?;
                Ok((case.id.clone(), render_prompt(case, scene, bundle)?))
            })
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<(), ManifestError> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut out, self)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, ManifestError> {
        let manifest: Manifest = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(ManifestError::SchemaVersion(manifest.schema_version));
        }
        let scenes = manifest.scene_index();
        if let Some(case) = manifest
            .cases
            .iter()
            .find(|c| !scenes.contains_key(c.scene.id().as_str()))
        {
            return Err(ManifestError::DanglingScene(case.scene.id()));
        }
        Ok(manifest)
    }
}
