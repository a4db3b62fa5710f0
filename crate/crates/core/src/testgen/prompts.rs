use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Perspective, SceneSpec, Split, TestCase};
use crate::geometry::Relation;

pub const TRANSLATIONS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("no translation for {item} in language `{language}`")]
    MissingTranslation { language: String, item: String },
    #[error("template for {slot} in `{language}` lacks required slot {missing}")]
    InvalidTemplate {
        language: String,
        slot: String,
        missing: String,
    },
    #[error("no decoy object disjoint from scene {0}")]
    NoDecoy(String),
    #[error("unsupported translation schema version {0}")]
    SchemaVersion(u32),
    #[error("reading translations: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing translations: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub nop: String,
    pub cam: String,
    pub add: String,
    pub rel: String,
}

impl PromptTemplates {
    pub fn get(&self, perspective: Perspective) -> &str {
        match perspective {
            Perspective::Nop => &self.nop,
            Perspective::Cam => &self.cam,
            Perspective::Add => &self.add,
            Perspective::Rel => &self.rel,
        }
    }
}

/// Surface forms of one object noun.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPhrase {
    /// Used in possessive viewpoint clauses: "woman" in "the woman's viewpoint".
    pub bare: String,
    pub definite: String,
    pub indefinite: String,
}

/// Everything needed to phrase queries in one language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    #[serde(default)]
    pub language: String,
    pub templates: PromptTemplates,
    pub relations: BTreeMap<Relation, String>,
    pub objects: BTreeMap<String, ObjectPhrase>,
    /// Existence question with an `[object]` slot.
    pub existence: String,
    pub answer_instruction: String,
    pub affirmative: Vec<String>,
    pub negative: Vec<String>,
}

fn phrase(bare: &str, definite: &str, indefinite: &str) -> ObjectPhrase {
    ObjectPhrase {
        bare: bare.into(),
        definite: definite.into(),
        indefinite: indefinite.into(),
    }
}

impl PromptBundle {
    pub fn english() -> Self {
        let mut objects = BTreeMap::new();
        let mut add = |id: &str, bare: &str| {
            let article = if bare.starts_with(['a', 'e', 'i', 'o', 'u']) {
                "an"
            } else {
                "a"
            };
            objects.insert(
                id.to_string(),
                phrase(bare, &format!("the {bare}"), &format!("{article} {bare}")),
            );
        };
        for (id, bare) in [
            ("red_ball", "red ball"),
            ("blue_ball", "blue ball"),
            ("yellow_ball", "yellow ball"),
            ("green_ball", "green ball"),
            ("purple_cube", "purple cube"),
            ("basketball", "basketball"),
            ("woman", "woman"),
            ("horse", "horse"),
            ("car", "car"),
            ("bench", "bench"),
            ("laptop", "laptop"),
            ("rubber_duck", "rubber duck"),
            ("chair", "chair"),
            ("dog", "dog"),
            ("sofa", "sofa"),
            ("bed", "bed"),
            ("bicycle", "bicycle"),
            ("banana", "banana"),
            ("umbrella", "umbrella"),
            ("clock", "clock"),
            ("teapot", "teapot"),
            ("guitar", "guitar"),
        ] {
            add(id, bare);
        }
        PromptBundle {
            language: "en".into(),
            templates: PromptTemplates {
                nop: "Is [A] [relation] [B]?".into(),
                cam: "From the camera's viewpoint, is [A] [relation] [B]?".into(),
                add: "From the [addressee]'s viewpoint, is [A] [relation] [B]?".into(),
                rel: "From the [relatum]'s viewpoint, is [A] [relation] [B]?".into(),
            },
            relations: BTreeMap::from([
                (Relation::Left, "to the left of".into()),
                (Relation::Right, "to the right of".into()),
                (Relation::Front, "in front of".into()),
                (Relation::Behind, "behind".into()),
            ]),
            objects,
            existence: "Is there [object] in the image?".into(),
            answer_instruction: "Answer with Yes or No only.".into(),
            affirmative: vec!["yes".into()],
            negative: vec!["no".into()],
        }
    }

    pub fn validate(&self) -> Result<(), BundleError> {
        let require = |slot: &str, template: &str, needed: &[&str]| {
            for n in needed {
                if !template.contains(n) {
                    return Err(BundleError::InvalidTemplate {
                        language: self.language.clone(),
                        slot: slot.to_string(),
                        missing: n.to_string(),
                    });
                }
            }
            Ok(())
        };
        let core = ["[A]", "[relation]", "[B]"];
        require("nop", &self.templates.nop, &core)?;
        require("cam", &self.templates.cam, &core)?;
        require(
            "add",
            &self.templates.add,
            &[&core[..], &["[addressee]"]].concat(),
        )?;
        require(
            "rel",
            &self.templates.rel,
            &[&core[..], &["[relatum]"]].concat(),
        )?;
        require("existence", &self.existence, &["[object]"])?;
        for r in Relation::ALL {
            self.relation(r)?;
        }
        if self.affirmative.is_empty() || self.negative.is_empty() {
            return Err(self.missing("answer lexemes"));
        }
        Ok(())
    }

    fn missing(&self, item: impl Into<String>) -> BundleError {
        BundleError::MissingTranslation {
            language: self.language.clone(),
            item: item.into(),
        }
    }

    pub fn object(&self, id: &str) -> Result<&ObjectPhrase, BundleError> {
        self.objects
            .get(id)
            .ok_or_else(|| self.missing(format!("object `{id}`")))
    }

    pub fn relation(&self, r: Relation) -> Result<&str, BundleError> {
        self.relations
            .get(&r)
            .map(String::as_str)
            .ok_or_else(|| self.missing(format!("relation `{r}`")))
    }
}

/// Translation table keyed by language code. English is always present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Translations {
    pub schema_version: u32,
    pub languages: BTreeMap<String, PromptBundle>,
}

impl Default for Translations {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Translations {
    pub fn builtin() -> Self {
        Self {
            schema_version: TRANSLATIONS_SCHEMA_VERSION,
            languages: BTreeMap::from([("en".to_string(), PromptBundle::english())]),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, BundleError> {
        let mut parsed: Translations = serde_json::from_str(text)?;
        if parsed.schema_version != TRANSLATIONS_SCHEMA_VERSION {
            return Err(BundleError::SchemaVersion(parsed.schema_version));
        }
        for (code, bundle) in parsed.languages.iter_mut() {
            bundle.language = code.clone();
            bundle.validate()?;
        }
        Ok(parsed)
    }

    /// Built-in English overlaid with the languages of the file at `path`.
    pub fn load(path: &Path) -> Result<Self, BundleError> {
        let file = Self::from_json(&std::fs::read_to_string(path)?)?;
        let mut out = Self::builtin();
        out.languages.extend(file.languages);
        Ok(out)
    }

    pub fn get(&self, language: &str) -> Result<&PromptBundle, BundleError> {
        self.languages
            .get(language)
            .ok_or_else(|| BundleError::MissingTranslation {
                language: language.to_string(),
                item: "bundle".to_string(),
            })
    }
}

/// Renders the natural-language query for `case`.
pub fn render_prompt(
    case: &TestCase,
    scene: &SceneSpec,
    bundle: &PromptBundle,
) -> Result<String, BundleError> {
    if bundle.language != case.language {
        return Err(BundleError::MissingTranslation {
            language: case.language.clone(),
            item: "bundle".to_string(),
        });
    }
    let template = bundle.templates.get(case.perspective);
    let mut text = template
        .replace("[A]", &bundle.object(&scene.referent.object)?.definite)
        .replace("[B]", &bundle.object(&scene.relatum.object)?.definite)
        .replace("[relation]", bundle.relation(case.relation)?);
    if text.contains("[addressee]") {
        let addressee = scene
            .addressee
            .as_ref()
            .ok_or_else(|| bundle.missing("addressee (scene has none)"))?;
        text = text.replace("[addressee]", &bundle.object(&addressee.object)?.bare);
    }
    if text.contains("[relatum]") {
        text = text.replace("[relatum]", &bundle.object(&scene.relatum.object)?.bare);
    }
    Ok(text)
}

/// Object-existence question with its ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probe {
    pub id: String,
    pub scene_id: String,
    pub language: String,
    pub object: String,
    /// `true` when the object is in the scene.
    pub present: bool,
    pub prompt: String,
}

/// One present-object and one absent-object probe for `scene`.
pub fn hallucination_probes(
    scene: &SceneSpec,
    bundle: &PromptBundle,
    decoys: &[String],
) -> Result<(Probe, Probe), BundleError> {
    let present_object = match scene.key.split {
        Split::Ball => &scene.referent.object,
        Split::Car => &scene.relatum.object,
    };
    let in_scene = scene.objects();
    let candidates: Vec<&String> = decoys
        .iter()
        .filter(|d| !in_scene.contains(&d.as_str()))
        .collect();
    if candidates.is_empty() {
        return Err(BundleError::NoDecoy(scene.id.clone()));
    }
    let decoy = candidates[(crate::fnv1a(scene.id.as_bytes()) % candidates.len() as u64) as usize];
    let ask = |object: &str| -> Result<String, BundleError> {
        Ok(bundle
            .existence
            .replace("[object]", &bundle.object(object)?.indefinite))
    };
    let make = |object: &str, present: bool| -> Result<Probe, BundleError> {
        Ok(Probe {
            id: format!(
                "{}-probe-{}-{}",
                scene.id,
                if present { "present" } else { "absent" },
                bundle.language
            ),
            scene_id: scene.id.clone(),
            language: bundle.language.clone(),
            object: object.to_string(),
            present,
            prompt: ask(object)?,
        })
    };
    Ok((make(present_object, true)?, make(decoy, false)?))
}
