//! Test-suite generation: case enumeration, scene placement and prompt assembly.

mod manifest;
mod prompts;

pub use manifest::{Manifest, ManifestError, MANIFEST_SCHEMA_VERSION};
pub use prompts::{
    hallucination_probes, render_prompt, BundleError, ObjectPhrase, Probe, PromptBundle,
    PromptTemplates, Translations, TRANSLATIONS_SCHEMA_VERSION,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose, Relation, SceneGeometry, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("variant `{variant}` is not defined for the {split} split")]
    UnknownVariant { split: Split, variant: Variant },
    #[error("unknown object `{0}`")]
    UnknownObject(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Ball,
    Car,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Ball => "ball",
            Split::Car => "car",
        }
    }

    pub fn default_radius(self) -> f64 {
        match self {
            Split::Ball => 1.5,
            Split::Car => 2.5,
        }
    }

    pub fn default_variants(self) -> Vec<Variant> {
        match self {
            Split::Ball => vec![
                Variant::Base,
                Variant::Distractor,
                Variant::Colors,
                Variant::Sizes,
                Variant::CameraPose,
            ],
            Split::Car => vec![
                Variant::Base,
                Variant::Jitter(1),
                Variant::Jitter(2),
                Variant::Jitter(3),
                Variant::Jitter(4),
            ],
        }
    }

    pub fn default_perspectives(self) -> Vec<Perspective> {
        match self {
            Split::Ball => vec![Perspective::Cam],
            Split::Car => Perspective::ALL.to_vec(),
        }
    }

    fn accepts(self, variant: Variant) -> bool {
        matches!(
            (self, variant),
            (_, Variant::Base)
                | (
                    Split::Ball,
                    Variant::Distractor | Variant::Colors | Variant::Sizes | Variant::CameraPose
                )
                | (Split::Car, Variant::Jitter(1..=4))
        )
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ball" => Ok(Split::Ball),
            "car" => Ok(Split::Car),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// Perspective clause prepended to the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Perspective {
    Nop,
    Cam,
    Add,
    Rel,
}

impl Perspective {
    pub const ALL: [Perspective; 4] = [
        Perspective::Nop,
        Perspective::Cam,
        Perspective::Add,
        Perspective::Rel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Perspective::Nop => "nop",
            Perspective::Cam => "cam",
            Perspective::Add => "add",
            Perspective::Rel => "rel",
        }
    }
}

impl fmt::Display for Perspective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Perspective {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nop" => Ok(Perspective::Nop),
            "cam" => Ok(Perspective::Cam),
            "add" => Ok(Perspective::Add),
            "rel" => Ok(Perspective::Rel),
            other => Err(format!("unknown perspective `{other}`")),
        }
    }
}

/// Scene variant. BALL uses the named kinds; CAR uses the base scene plus jitter seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Base,
    Distractor,
    Colors,
    Sizes,
    CameraPose,
    Jitter(u8),
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Base => f.write_str("base"),
            Variant::Distractor => f.write_str("distractor"),
            Variant::Colors => f.write_str("colors"),
            Variant::Sizes => f.write_str("sizes"),
            Variant::CameraPose => f.write_str("camera"),
            Variant::Jitter(n) => write!(f, "jitter-{n}"),
        }
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(Variant::Base),
            "distractor" => Ok(Variant::Distractor),
            "colors" => Ok(Variant::Colors),
            "sizes" => Ok(Variant::Sizes),
            "camera" => Ok(Variant::CameraPose),
            other => other
                .strip_prefix("jitter-")
                .and_then(|n| n.parse().ok())
                .map(Variant::Jitter)
                .ok_or_else(|| format!("unknown variant `{other}`")),
        }
    }
}

impl Serialize for Variant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Image-plane direction a fronted relatum faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Facing {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleMode {
    /// Full sweep for English-only suites, prototypical angles once any other language is
    /// requested.
    Auto,
    Full,
    Prototypical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    /// Horizontal distance from the relatum, meters.
    pub distance: f64,
    pub height: f64,
    /// Azimuth offset applied by the camera-pose variant, degrees.
    pub alternate_azimuth: f64,
    pub alternate_height: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            distance: 7.0,
            height: 3.0,
            alternate_azimuth: 30.0,
            alternate_height: 4.5,
        }
    }
}

pub const DEFAULT_CAR_RELATA: [&str; 10] = [
    "horse",
    "car",
    "bench",
    "laptop",
    "rubber_duck",
    "chair",
    "dog",
    "sofa",
    "bed",
    "bicycle",
];

pub const DEFAULT_DECOYS: [&str; 5] = ["banana", "umbrella", "clock", "teapot", "guitar"];

pub const PROTOTYPICAL_ANGLES: [u32; 4] = [0, 90, 180, 270];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub split: Split,
    pub angle_step: u32,
    pub angle_mode: AngleMode,
    pub languages: Vec<String>,
    /// Split default when absent.
    pub variants: Option<Vec<Variant>>,
    pub perspectives: Option<Vec<Perspective>>,
    pub radius: Option<f64>,
    pub camera: CameraConfig,
    /// Lateral offset of the addressee to the image-left of the relatum (CAR), meters.
    pub addressee_offset: f64,
    pub relatum_objects: Vec<String>,
    pub facings: Vec<Facing>,
    pub decoys: Vec<String>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self::new(Split::Ball)
    }
}

impl GenerationConfig {
    pub fn new(split: Split) -> Self {
        Self {
            split,
            angle_step: 10,
            angle_mode: AngleMode::Auto,
            languages: vec!["en".to_string()],
            variants: None,
            perspectives: None,
            radius: None,
            camera: CameraConfig::default(),
            addressee_offset: 3.0,
            relatum_objects: DEFAULT_CAR_RELATA.iter().map(|s| s.to_string()).collect(),
            facings: vec![Facing::Left, Facing::Right],
            decoys: DEFAULT_DECOYS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius.unwrap_or_else(|| self.split.default_radius())
    }

    pub fn variants(&self) -> Vec<Variant> {
        self.variants
            .clone()
            .unwrap_or_else(|| self.split.default_variants())
    }

    pub fn perspectives(&self) -> Vec<Perspective> {
        self.perspectives
            .clone()
            .unwrap_or_else(|| self.split.default_perspectives())
    }

    /// Number of object combinations: one for BALL, relata × facings for CAR.
    pub fn combos(&self) -> u32 {
        match self.split {
            Split::Ball => 1,
            Split::Car => (self.relatum_objects.len() * self.facings.len()) as u32,
        }
    }

    pub fn sweep_angles(&self) -> Vec<u32> {
        let prototypical = match self.angle_mode {
            AngleMode::Full => false,
            AngleMode::Prototypical => true,
            AngleMode::Auto => self.languages.iter().any(|l| l != "en"),
        };
        if prototypical {
            PROTOTYPICAL_ANGLES.to_vec()
        } else {
            (0..360).step_by(self.angle_step.max(1) as usize).collect()
        }
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        let invalid = |m: &str| Err(GenerationError::InvalidConfig(m.to_string()));
        if self.angle_step == 0 || 360 % self.angle_step != 0 {
            return invalid("angle step must divide 360");
        }
        if self.languages.is_empty() {
            return invalid("at least one language is required");
        }
        let mut langs = self.languages.clone();
        langs.sort();
        langs.dedup();
        if langs.len() != self.languages.len() {
            return invalid("languages must be distinct");
        }
        if !(self.radius() > 0.0) {
            return invalid("radius must be positive");
        }
        if !(self.camera.distance > 0.0) {
            return invalid("camera distance must be positive");
        }
        let variants = self.variants();
        if variants.is_empty() {
            return invalid("at least one variant is required");
        }
        for v in &variants {
            if !self.split.accepts(*v) {
                return Err(GenerationError::UnknownVariant {
                    split: self.split,
                    variant: *v,
                });
            }
        }
        if variants
            .iter()
            .collect::<std::collections::BTreeSet<_>>()
            .len()
            != variants.len()
        {
            return invalid("variants must be distinct");
        }
        let perspectives = self.perspectives();
        if perspectives.is_empty() {
            return invalid("at least one perspective is required");
        }
        if self.split == Split::Ball
            && perspectives
                .iter()
                .any(|p| matches!(p, Perspective::Add | Perspective::Rel))
        {
            return invalid(
                "BALL scenes have no addressee or fronted relatum to take a viewpoint from",
            );
        }
        if self.split == Split::Car {
            if self.relatum_objects.is_empty() || self.facings.is_empty() {
                return invalid("CAR needs at least one relatum object and facing");
            }
            if !(self.addressee_offset > 0.0) {
                return invalid("addressee offset must be positive");
            }
        }
        if self.decoys.is_empty() {
            return invalid("at least one decoy object is required");
        }
        Ok(())
    }
}

/// Identifies one rendered scene. Language independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SceneKey {
    pub split: Split,
    pub combo: u32,
    pub variant: Variant,
    pub sweep_angle: u32,
}

impl SceneKey {
    pub fn id(&self) -> String {
        format!(
            "{}-c{:02}-{}-a{:03}",
            self.split, self.combo, self.variant, self.sweep_angle
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub scene: SceneKey,
    pub relation: Relation,
    pub perspective: Perspective,
    pub language: String,
}

impl TestCase {
    pub fn new(
        scene: SceneKey,
        relation: Relation,
        perspective: Perspective,
        language: &str,
    ) -> Self {
        let id = format!("{}-{}-{}-{}", scene.id(), relation, perspective, language);
        Self {
            id,
            scene,
            relation,
            perspective,
            language: language.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPlacement {
    pub object: String,
    pub position: Vec3,
    /// Unit facing vector, only for fronted objects.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facing: Option<Vec3>,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddresseePose {
    pub object: String,
    pub position: Vec3,
    pub facing: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vec3,
    pub look_at: Vec3,
}

/// Fully positioned scene, ready for a renderer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub id: String,
    pub key: SceneKey,
    pub sweep_angle: f64,
    pub radius: f64,
    pub relatum: ObjectPlacement,
    pub referent: ObjectPlacement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub addressee: Option<AddresseePose>,
    pub camera: CameraPose,
    #[serde(default)]
    pub distractors: Vec<ObjectPlacement>,
}

impl SceneSpec {
    pub fn geometry(&self) -> SceneGeometry {
        SceneGeometry {
            relatum: self.relatum.position,
            relatum_facing: self.relatum.facing,
            referent: self.referent.position,
            camera: self.camera.position,
            addressee: self.addressee.as_ref().map(|a| Pose {
                position: a.position,
                facing: a.facing,
            }),
        }
    }

    /// Every object id that appears in the scene.
    pub fn objects(&self) -> Vec<&str> {
        let mut out = vec![self.referent.object.as_str(), self.relatum.object.as_str()];
        if let Some(a) = &self.addressee {
            out.push(a.object.as_str());
        }
        out.extend(self.distractors.iter().map(|d| d.object.as_str()));
        out
    }
}

/// Enumerates every test case for the configuration in a stable order: language, object
/// combination, variant, sweep angle, relation, perspective.
pub fn enumerate_cases(config: &GenerationConfig) -> Result<Vec<TestCase>, GenerationError> {
    config.validate()?;
    let angles = config.sweep_angles();
    let variants = config.variants();
    let perspectives = config.perspectives();
    let mut cases = Vec::with_capacity(
        config.languages.len()
            * config.combos() as usize
            * variants.len()
            * angles.len()
            * Relation::ALL.len()
            * perspectives.len(),
    );
    for language in &config.languages {
        for combo in 0..config.combos() {
            for &variant in &variants {
                for &sweep_angle in &angles {
                    let scene = SceneKey {
                        split: config.split,
                        combo,
                        variant,
                        sweep_angle,
                    };
                    for relation in Relation::ALL {
                        for &perspective in &perspectives {
                            cases.push(TestCase::new(scene, relation, perspective, language));
                        }
                    }
                }
            }
        }
    }
    Ok(cases)
}

/// Distinct scenes referenced by `cases`, in first-appearance order.
pub fn distinct_scenes(cases: &[TestCase]) -> Vec<SceneKey> {
    let mut seen = std::collections::HashSet::new();
    cases
        .iter()
        .filter(|c| seen.insert(c.scene))
        .map(|c| c.scene)
        .collect()
}

fn jitter(seed: u8, salt: u8) -> f64 {
    // deterministic value in [-1, 1]
    let h = crate::fnv1a(&[seed, salt]);
    (h % 2001) as f64 / 1000.0 - 1.0
}

/// Builds the positioned scene for `key` under `config`.
pub fn build_scene(key: SceneKey, config: &GenerationConfig) -> Result<SceneSpec, GenerationError> {
    if key.split != config.split {
        return Err(GenerationError::InvalidConfig(format!(
            "scene {} does not belong to the {} split",
            key.id(),
            config.split
        )));
    }
    if !config.split.accepts(key.variant) {
        return Err(GenerationError::UnknownVariant {
            split: config.split,
            variant: key.variant,
        });
    }
    let relatum_pos = Vec3::default();
    let cam = &config.camera;
    let (mut cam_distance, mut cam_height, mut cam_azimuth) = (cam.distance, cam.height, 0.0);
    let mut radius = config.radius();
    let mut referent_scale = 1.0;
    let mut relatum_scale = 1.0;
    match key.variant {
        Variant::CameraPose => {
            cam_azimuth = cam.alternate_azimuth;
            cam_height = cam.alternate_height;
        }
        Variant::Sizes => {
            referent_scale = 0.6;
            relatum_scale = 1.4;
        }
        Variant::Jitter(seed) => {
            // jitter stays on the camera's line of sight so the angular grid is preserved
            cam_distance *= 1.0 + 0.1 * jitter(seed, 0);
            cam_height *= 1.0 + 0.2 * jitter(seed, 1);
            radius *= 1.0 + 0.1 * jitter(seed, 2);
            referent_scale = 1.0 + 0.15 * jitter(seed, 3);
        }
        _ => {}
    }
    // the camera sits on the image-bottom side (−y) of the relatum, rotated by the azimuth
    let toward_camera = Vec3::new(0.0, -1.0, 0.0).rotate_ccw(cam_azimuth);
    let camera_pos = relatum_pos + toward_camera * cam_distance + Vec3::UP * cam_height;
    // image-right on the ground plane for this camera
    let image_right = (-toward_camera).cross(Vec3::UP);

    // sweep angle 0 is the point nearest the camera
    let referent_dir = toward_camera.rotate_ccw(key.sweep_angle as f64);
    let referent_pos = relatum_pos + referent_dir * radius;

    let (relatum, referent, addressee, distractors) = match config.split {
        Split::Ball => {
            let (ref_obj, rel_obj) = if key.variant == Variant::Colors {
                ("yellow_ball", "green_ball")
            } else {
                ("red_ball", "blue_ball")
            };
            let distractors = if key.variant == Variant::Distractor {
                vec![ObjectPlacement {
                    object: "purple_cube".to_string(),
                    position: relatum_pos + image_right * (radius * 2.2) - toward_camera * radius,
                    facing: None,
                    scale: 1.0,
                }]
            } else {
                Vec::new()
            };
            (
                ObjectPlacement {
                    object: rel_obj.to_string(),
                    position: relatum_pos,
                    facing: None,
                    scale: relatum_scale,
                },
                ObjectPlacement {
                    object: ref_obj.to_string(),
                    position: referent_pos,
                    facing: None,
                    scale: referent_scale,
                },
                None,
                distractors,
            )
        }
        Split::Car => {
            let n_facings = config.facings.len() as u32;
            let object = config
                .relatum_objects
                .get((key.combo / n_facings) as usize)
                .ok_or_else(|| GenerationError::UnknownObject(format!("combo {}", key.combo)))?;
            if object.is_empty() {
                return Err(GenerationError::UnknownObject(object.clone()));
            }
            let facing = match config.facings[(key.combo % n_facings) as usize] {
                Facing::Left => -image_right,
                Facing::Right => image_right,
            };
            (
                ObjectPlacement {
                    object: object.clone(),
                    position: relatum_pos,
                    facing: Some(facing),
                    scale: relatum_scale,
                },
                ObjectPlacement {
                    object: "basketball".to_string(),
                    position: referent_pos,
                    facing: None,
                    scale: referent_scale,
                },
                Some(AddresseePose {
                    object: "woman".to_string(),
                    position: relatum_pos - image_right * config.addressee_offset,
                    facing: image_right,
                }),
                Vec::new(),
            )
        }
    };

    Ok(SceneSpec {
        id: key.id(),
        key,
        sweep_angle: key.sweep_angle as f64,
        radius,
        relatum,
        referent,
        addressee,
        camera: CameraPose {
            position: camera_pos,
            look_at: relatum_pos,
        },
        distractors,
    })
}

/// Positioned scene for a test case.
pub fn scene_spec(
    case: &TestCase,
    config: &GenerationConfig,
) -> Result<SceneSpec, GenerationError> {
    build_scene(case.scene, config)
}
