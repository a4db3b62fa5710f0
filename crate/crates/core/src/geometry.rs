//! Frames of reference, coordinate-transform conventions and acceptance regions.
//!
//! World coordinates are right-handed with `z` up. Every computation happens on the
//! ground plane: elevations are dropped before any axis or angle is derived. Angles are
//! in degrees, positive counterclockwise when viewed from above.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance below which a ground-plane vector is treated as zero length.
const DEGENERATE_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("frame origin {0} requires a pose that the scene does not provide")]
    MissingPose(Origin),
    #[error("viewer coincides with the relatum on the ground plane")]
    DegenerateGaze,
    #[error("referent sits on top of the relatum on the ground plane")]
    DegeneratePlacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const UP: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Drops the vertical component.
    pub fn ground(self) -> Vec3 {
        Vec3::new(self.x, self.y, 0.0)
    }

    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > DEGENERATE_EPS).then(|| self * (1.0 / n))
    }

    /// Rotates about the vertical axis, counterclockwise from above.
    pub fn rotate_ccw(self, degrees: f64) -> Vec3 {
        let (s, c) = degrees.to_radians().sin_cos();
        Vec3::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }

    pub fn approx_eq(self, other: Vec3, tol: f64) -> bool {
        (self - other).norm() <= tol
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Left,
    Right,
    Front,
    Behind,
}

impl Relation {
    pub const ALL: [Relation; 4] = [
        Relation::Left,
        Relation::Right,
        Relation::Front,
        Relation::Behind,
    ];

    pub fn opposite(self) -> Relation {
        match self {
            Relation::Left => Relation::Right,
            Relation::Right => Relation::Left,
            Relation::Front => Relation::Behind,
            Relation::Behind => Relation::Front,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Left => "left",
            Relation::Right => "right",
            Relation::Front => "front",
            Relation::Behind => "behind",
        }
    }

    /// Canonical direction of the relation expressed in `frame`.
    pub fn canonical_axis(self, frame: &Frame) -> Vec3 {
        match self {
            Relation::Front => frame.front,
            Relation::Behind => -frame.front,
            Relation::Right => frame.right,
            Relation::Left => -frame.right,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(Relation::Left),
            "right" => Ok(Relation::Right),
            "front" => Ok(Relation::Front),
            "behind" | "back" => Ok(Relation::Behind),
            other => Err(format!("unknown relation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Camera,
    Addressee,
    Relatum,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Camera => "camera",
            Origin::Addressee => "addressee",
            Origin::Relatum => "relatum",
        })
    }
}

/// How a viewer's axes are projected onto the relatum in a relative frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Translated,
    Rotated,
    Reflected,
}

impl Transform {
    pub const ALL: [Transform; 3] = [
        Transform::Translated,
        Transform::Rotated,
        Transform::Reflected,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Transform::Translated => "translated",
            Transform::Rotated => "rotated",
            Transform::Reflected => "reflected",
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A frame-of-reference choice. Relative origins always carry a transform; the
/// intrinsic (relatum) origin never does, which the variant shapes enforce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "origin", rename_all = "lowercase")]
pub enum ForSpec {
    Camera { transform: Transform },
    Addressee { transform: Transform },
    Relatum,
}

impl ForSpec {
    pub const EGOCENTRIC: ForSpec = ForSpec::Camera {
        transform: Transform::Reflected,
    };
    pub const INTRINSIC: ForSpec = ForSpec::Relatum;
    pub const ADDRESSEE: ForSpec = ForSpec::Addressee {
        transform: Transform::Reflected,
    };

    pub fn origin(self) -> Origin {
        match self {
            ForSpec::Camera { .. } => Origin::Camera,
            ForSpec::Addressee { .. } => Origin::Addressee,
            ForSpec::Relatum => Origin::Relatum,
        }
    }

    pub fn transform(self) -> Option<Transform> {
        match self {
            ForSpec::Camera { transform } | ForSpec::Addressee { transform } => Some(transform),
            ForSpec::Relatum => None,
        }
    }

    pub fn new(origin: Origin, transform: Option<Transform>) -> Result<Self, String> {
        match (origin, transform) {
            (Origin::Camera, Some(transform)) => Ok(ForSpec::Camera { transform }),
            (Origin::Addressee, Some(transform)) => Ok(ForSpec::Addressee { transform }),
            (Origin::Relatum, None) => Ok(ForSpec::Relatum),
            (Origin::Relatum, Some(_)) => Err("the relatum origin takes no transform".into()),
            (o, None) => Err(format!("origin {o} requires a transform")),
        }
    }

    /// Every frame the toolkit knows how to resolve.
    pub fn all() -> Vec<ForSpec> {
        let mut out = Vec::with_capacity(7);
        for t in Transform::ALL {
            out.push(ForSpec::Camera { transform: t });
        }
        for t in Transform::ALL {
            out.push(ForSpec::Addressee { transform: t });
        }
        out.push(ForSpec::Relatum);
        out
    }

    /// Short label such as `camera-reflected` or `relatum`.
    pub fn label(self) -> String {
        match self.transform() {
            Some(t) => format!("{}-{}", self.origin(), t),
            None => self.origin().to_string(),
        }
    }
}

impl fmt::Display for ForSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for ForSpec {
    type Err = String;

    /// Accepts `camera-reflected`, `ego-reflected`, `addressee-rotated`, `add-translated`,
    /// `relatum` or `int`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.splitn(2, '-');
        let origin = match parts.next().unwrap_or_default() {
            "camera" | "cam" | "ego" | "egocentric" => Origin::Camera,
            "addressee" | "add" => Origin::Addressee,
            "relatum" | "rel" | "int" | "intrinsic" => Origin::Relatum,
            other => return Err(format!("unknown frame origin `{other}`")),
        };
        let transform = match parts.next() {
            None => None,
            Some("translated" | "tran" | "trans") => Some(Transform::Translated),
            Some("rotated" | "rot") => Some(Transform::Rotated),
            Some("reflected" | "ref") => Some(Transform::Reflected),
            Some(other) => return Err(format!("unknown transform `{other}`")),
        };
        ForSpec::new(origin, transform)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Handedness {
    /// (front, left, up) is a right-handed basis, as for any physical observer.
    Proper,
    /// Mirror image of a proper frame; the reflected convention produces these.
    Mirrored,
}

/// A resolved ground-plane coordinate system centred on the relatum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub origin_point: Vec3,
    pub front: Vec3,
    pub right: Vec3,
    pub up: Vec3,
}

impl Frame {
    fn from_front_right(origin_point: Vec3, front: Vec3, right: Vec3) -> Frame {
        Frame {
            origin_point,
            front,
            right,
            up: Vec3::UP,
        }
    }

    pub fn handedness(&self) -> Handedness {
        // front x right points down for a physical observer
        if self.front.cross(self.right).dot(self.up) < 0.0 {
            Handedness::Proper
        } else {
            Handedness::Mirrored
        }
    }

    /// Largest violation of unit length or pairwise orthogonality among the axes.
    pub fn orthonormality_error(&self) -> f64 {
        let axes = [self.front, self.right, self.up];
        let mut worst: f64 = 0.0;
        for (i, a) in axes.iter().enumerate() {
            worst = worst.max((a.norm() - 1.0).abs());
            for b in &axes[i + 1..] {
                worst = worst.max(a.dot(*b).abs());
            }
        }
        worst
    }
}

/// Pose of a viewer or fronted object: a position and a facing direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub facing: Vec3,
}

/// The geometric facts a frame needs from a scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneGeometry {
    pub relatum: Vec3,
    pub relatum_facing: Option<Vec3>,
    pub referent: Vec3,
    pub camera: Vec3,
    pub addressee: Option<Pose>,
}

/// Signed angle in degrees, always within (-180, 180].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviationAngle(f64);

impl DeviationAngle {
    pub fn new(degrees: f64) -> Self {
        DeviationAngle(wrap_degrees(degrees))
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    /// Rounds onto a grid of `step` degrees when within `tol` of a grid point.
    pub fn snapped(self, step: f64, tol: f64) -> Self {
        let k = (self.0 / step).round();
        if (self.0 - k * step).abs() <= tol {
            DeviationAngle::new(k * step)
        } else {
            self
        }
    }
}

impl fmt::Display for DeviationAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}°", self.0)
    }
}

/// Wraps into (-180, 180]; -180 maps to +180.
pub fn wrap_degrees(degrees: f64) -> f64 {
    let mut d = degrees % 360.0;
    if d <= -180.0 {
        d += 360.0;
    } else if d > 180.0 {
        d -= 360.0;
    }
    d
}

/// Whether the hemisphere boundary at |θ| = 90° counts as inside the region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
    Closed,
}

impl FromStr for Boundary {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "open" => Ok(Boundary::Open),
            "closed" => Ok(Boundary::Closed),
            other => Err(format!("unknown boundary mode `{other}`")),
        }
    }
}

fn viewer_frame(center: Vec3, gaze: Vec3, transform: Transform) -> Frame {
    let right = gaze.cross(Vec3::UP);
    match transform {
        Transform::Translated => Frame::from_front_right(center, gaze, right),
        Transform::Rotated => Frame::from_front_right(center, -gaze, -right),
        Transform::Reflected => Frame::from_front_right(center, -gaze, right),
    }
}

/// Resolves a frame-of-reference choice into concrete ground-plane axes at the relatum.
pub fn resolve_frame(scene: &SceneGeometry, spec: ForSpec) -> Result<Frame, GeometryError> {
    let center = scene.relatum.ground();
    match spec {
        ForSpec::Relatum => {
            let facing = scene
                .relatum_facing
                .ok_or(GeometryError::MissingPose(Origin::Relatum))?;
            let front = facing
                .ground()
                .normalized()
                .ok_or(GeometryError::DegenerateGaze)?;
            Ok(Frame::from_front_right(
                center,
                front,
                front.cross(Vec3::UP),
            ))
        }
        ForSpec::Camera { transform } => {
            let gaze = (center - scene.camera.ground())
                .normalized()
                .ok_or(GeometryError::DegenerateGaze)?;
            Ok(viewer_frame(center, gaze, transform))
        }
        ForSpec::Addressee { transform } => {
            let pose = scene
                .addressee
                .ok_or(GeometryError::MissingPose(Origin::Addressee))?;
            let gaze = pose
                .facing
                .ground()
                .normalized()
                .ok_or(GeometryError::DegenerateGaze)?;
            Ok(viewer_frame(center, gaze, transform))
        }
    }
}

fn signed_angle(from: Vec3, to: Vec3) -> f64 {
    from.cross(to).z.atan2(from.dot(to)).to_degrees()
}

/// Signed angle from the canonical axis of `relation` in `frame` to the relatum→referent
/// vector.
pub fn deviation_angle(
    scene: &SceneGeometry,
    relation: Relation,
    frame: &Frame,
) -> Result<DeviationAngle, GeometryError> {
    let offset = (scene.referent - scene.relatum).ground();
    if offset.norm() <= DEGENERATE_EPS {
        return Err(GeometryError::DegeneratePlacement);
    }
    let axis = relation.canonical_axis(frame);
    Ok(DeviationAngle::new(signed_angle(axis, offset)))
}

/// Hemisphere reference: 1 inside (-90°, 90°), 0 elsewhere; `Closed` also admits ±90°.
pub fn lambda_hemi(theta: DeviationAngle, boundary: Boundary) -> f64 {
    let t = theta.degrees().abs();
    let inside = match boundary {
        Boundary::Open => t < 90.0,
        Boundary::Closed => t <= 90.0,
    };
    if inside {
        1.0
    } else {
        0.0
    }
}

/// Cosine reference `(cos θ + 1) / 2`.
pub fn lambda_cos(theta: DeviationAngle) -> f64 {
    (theta.degrees().to_radians().cos() + 1.0) / 2.0
}

pub fn in_acceptance_region(theta: DeviationAngle, boundary: Boundary) -> bool {
    lambda_hemi(theta, boundary) == 1.0
}
