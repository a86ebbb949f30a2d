//! Synthetic scenes and the deterministic mini path tracer that stands in for
//! the G-buffer rasterizer and the shadow / glossy ray tracers.

mod env;
mod fireflies;
mod geometry;
pub mod presets;
mod render;

use std::fs;
use std::path::{Path, PathBuf};

use glam::Vec3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pfm::{self, PfmImage};

pub use env::{
    direction_from_angles, level_roughness, lobe_exponent, prefilter_env, texel_direction,
    texel_solid_angle, EnvMap, PrefilteredEnvMap,
};
pub use fireflies::inject_fireflies;
pub use geometry::{intersect_box, intersect_ground, intersect_sphere, Ray};
pub use render::{render_frame, render_reference, Reference, RenderParams, Renderer, REFERENCE_SPP};

/// A linearly interpolated keyframe track; held constant outside its keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Track {
    Static(Vec3),
    Keys(Vec<Keyframe>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub frame: f32,
    pub value: Vec3,
}

impl Track {
    pub fn at(&self, frame: usize) -> Vec3 {
        let keys = match self {
            Track::Static(v) => return *v,
            Track::Keys(keys) => keys,
        };
        let f = frame as f32;
        match keys.iter().position(|k| k.frame > f) {
            None => keys.last().map(|k| k.value).unwrap_or(Vec3::ZERO),
            Some(0) => keys[0].value,
            Some(i) => {
                let (a, b) = (keys[i - 1], keys[i]);
                let t = (f - a.frame) / (b.frame - a.frame);
                a.value.lerp(b.value, t)
            }
        }
    }

    pub fn is_static(&self) -> bool {
        match self {
            Track::Static(_) => true,
            Track::Keys(keys) => keys.windows(2).all(|w| w[0].value == w[1].value),
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if let Track::Keys(keys) = self {
            if keys.is_empty() {
                return Err(Error::Scene(format!("{what}: empty keyframe list")));
            }
            if keys.windows(2).any(|w| w[1].frame <= w[0].frame) {
                return Err(Error::Scene(format!("{what}: keyframes must be strictly increasing")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraRig {
    pub position: Track,
    pub target: Track,
    #[serde(default = "default_up")]
    pub up: Vec3,
    pub vfov_deg: f32,
}

fn default_up() -> Vec3 {
    Vec3::Y
}

/// Pinhole camera for one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub tan_half_fov: f32,
    pub aspect: f32,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    /// Unit direction through continuous pixel coordinates (pixel centers at
    /// `+0.5`).
    pub fn ray_dir(&self, px: f32, py: f32) -> Vec3 {
        let sx = (2.0 * px / self.width as f32 - 1.0) * self.tan_half_fov * self.aspect;
        let sy = (1.0 - 2.0 * py / self.height as f32) * self.tan_half_fov;
        (self.forward + self.right * sx + self.up * sy).normalize()
    }

    /// View-space depth along the forward axis.
    pub fn depth(&self, p: Vec3) -> f32 {
        (p - self.position).dot(self.forward)
    }

    /// Continuous pixel coordinates of a world point, if in front of the camera.
    pub fn project(&self, p: Vec3) -> Option<(f32, f32)> {
        let v = p - self.position;
        let z = v.dot(self.forward);
        if z <= 0.0 {
            return None;
        }
        let sx = v.dot(self.right) / (z * self.tan_half_fov * self.aspect);
        let sy = v.dot(self.up) / (z * self.tan_half_fov);
        Some((
            (sx + 1.0) * 0.5 * self.width as f32,
            (1.0 - sy) * 0.5 * self.height as f32,
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub albedo: Vec3,
    pub roughness: f32,
    #[serde(default)]
    pub emissive: Vec3,
    /// Scalar weight on the glossy reflection channel.
    #[serde(default = "default_reflectance")]
    pub reflectance: f32,
}

fn default_reflectance() -> f32 {
    0.5
}

impl Material {
    pub fn new(albedo: Vec3, roughness: f32) -> Self {
        Material {
            albedo,
            roughness,
            emissive: Vec3::ZERO,
            reflectance: default_reflectance(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Sphere { center: Vec3, radius: f32 },
    Box { min: Vec3, max: Vec3 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    pub shape: Shape,
    pub material: Material,
    /// World-space translation over time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<Track>,
}

impl SceneObject {
    pub fn offset(&self, frame: usize) -> Vec3 {
        self.motion.as_ref().map_or(Vec3::ZERO, |m| m.at(frame))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ground {
    pub id: u32,
    pub height: f32,
    pub material: Material,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Light {
    pub center: Track,
    pub intensity: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EnvSource {
    Gradient {
        width: usize,
        height: usize,
        zenith: Vec3,
        horizon: Vec3,
        ground: Vec3,
    },
    /// Lat-long PFM, resolved relative to the scene file's directory.
    Pfm { path: PathBuf },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Movement {
    #[default]
    Static,
    MovingCamera,
    MovingObjectsAndLight,
}

impl Movement {
    pub fn name(self) -> &'static str {
        match self {
            Movement::Static => "static",
            Movement::MovingCamera => "moving_camera",
            Movement::MovingObjectsAndLight => "moving_objects_and_light",
        }
    }
}

impl std::str::FromStr for Movement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Movement::Static, Movement::MovingCamera, Movement::MovingObjectsAndLight]
            .into_iter()
            .find(|m| m.name() == s || m.name().replace('_', "-") == s)
            .ok_or_else(|| Error::Scene(format!("unknown movement `{s}`")))
    }
}

/// Report metadata describing which sweep point a scene represents.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneTags {
    #[serde(default)]
    pub roughness: Option<f32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneDescriptor {
    pub name: String,
    pub width: usize,
    pub height: usize,
    /// Animation length in frames.
    pub frame_count: usize,
    pub camera: CameraRig,
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub ground: Option<Ground>,
    pub light: Light,
    /// Apex angle in degrees of the light's cone as seen from
    /// `reference_point`; zero makes the light a point.
    pub shadow_angle: f32,
    pub reference_point: Vec3,
    pub env: EnvSource,
    #[serde(default)]
    pub tags: SceneTags,
}

impl SceneDescriptor {
    pub fn from_json(text: &str) -> Result<Self> {
        let scene: SceneDescriptor = serde_json::from_str(text)
            .map_err(|e| Error::Scene(format!("scene JSON: {e}")))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut scene: SceneDescriptor = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_owned(),
            source,
        })?;
        if let EnvSource::Pfm { path: env } = &mut scene.env {
            if env.is_relative() {
                if let Some(dir) = path.parent() {
                    *env = dir.join(&*env);
                }
            }
        }
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Scene("image dimensions must be positive".into()));
        }
        if self.frame_count == 0 {
            return Err(Error::Scene("frame_count must be positive".into()));
        }
        if self.objects.is_empty() {
            return Err(Error::Scene("scene needs at least one object".into()));
        }
        let mut ids: Vec<u32> = self.objects.iter().map(|o| o.id).collect();
        if let Some(g) = &self.ground {
            ids.push(g.id);
        }
        if ids.contains(&0) {
            return Err(Error::Scene("object id 0 is reserved for background".into()));
        }
        let n = ids.len();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != n {
            return Err(Error::Scene("object ids must be unique".into()));
        }
        let materials = self
            .objects
            .iter()
            .map(|o| o.material)
            .chain(self.ground.iter().map(|g| g.material));
        for m in materials {
            if !(0.0..=1.0).contains(&m.roughness) {
                return Err(Error::Scene(format!("roughness {} outside [0, 1]", m.roughness)));
            }
            if m.albedo.min_element() < 0.0 || m.albedo.max_element() > 1.0 {
                return Err(Error::Scene("albedo outside [0, 1]".into()));
            }
            if m.emissive.min_element() < 0.0 || m.reflectance < 0.0 {
                return Err(Error::Scene("negative emission or reflectance".into()));
            }
        }
        for o in &self.objects {
            match o.shape {
                Shape::Sphere { radius, .. } if radius <= 0.0 => {
                    return Err(Error::Scene(format!("object {}: sphere radius must be positive", o.id)))
                }
                Shape::Box { min, max } if min.cmpge(max).any() => {
                    return Err(Error::Scene(format!("object {}: box min must be below max", o.id)))
                }
                _ => {}
            }
            if let Some(m) = &o.motion {
                m.validate(&format!("object {} motion", o.id))?;
            }
        }
        self.camera.position.validate("camera position")?;
        self.camera.target.validate("camera target")?;
        self.light.center.validate("light center")?;
        if !(0.0..180.0).contains(&self.shadow_angle) {
            return Err(Error::Scene(format!(
                "shadow_angle {} must be in [0, 180)",
                self.shadow_angle
            )));
        }
        if !(self.camera.vfov_deg > 0.0 && self.camera.vfov_deg < 180.0) {
            return Err(Error::Scene("vfov_deg must be in (0, 180)".into()));
        }
        if let EnvSource::Gradient { width, height, .. } = self.env {
            if width < 8 || height < 4 {
                return Err(Error::Scene("env map must be at least 8x4".into()));
            }
        }
        Ok(())
    }

    pub fn camera(&self, frame: usize) -> Camera {
        let position = self.camera.position.at(frame);
        let target = self.camera.target.at(frame);
        let forward = (target - position).normalize();
        let right = forward.cross(self.camera.up).normalize();
        let up = right.cross(forward);
        Camera {
            position,
            forward,
            right,
            up,
            tan_half_fov: (self.camera.vfov_deg.to_radians() * 0.5).tan(),
            aspect: self.width as f32 / self.height as f32,
            width: self.width,
            height: self.height,
        }
    }

    pub fn light_center(&self, frame: usize) -> Vec3 {
        self.light.center.at(frame)
    }

    /// Light sphere radius implied by the shadow angle, measured from the
    /// reference point to the frame-0 light position.
    pub fn light_radius(&self) -> f32 {
        let d = self.reference_point.distance(self.light_center(0));
        d * (self.shadow_angle.to_radians() * 0.5).tan()
    }

    pub fn movement(&self) -> Movement {
        let camera_moves = !self.camera.position.is_static() || !self.camera.target.is_static();
        let things_move =
            !self.light.center.is_static() || self.objects.iter().any(|o| o.motion.as_ref().is_some_and(|m| !m.is_static()));
        if things_move {
            Movement::MovingObjectsAndLight
        } else if camera_moves {
            Movement::MovingCamera
        } else {
            Movement::Static
        }
    }

    pub fn load_env(&self) -> Result<EnvMap> {
        match &self.env {
            EnvSource::Gradient {
                width,
                height,
                zenith,
                horizon,
                ground,
            } => Ok(EnvMap::gradient(*width, *height, *zenith, *horizon, *ground)),
            EnvSource::Pfm { path } => match pfm::read(path)? {
                PfmImage::Rgb(img) if img.width() >= 8 && img.height() >= 4 => Ok(EnvMap::new(img)),
                PfmImage::Rgb(_) => Err(Error::Scene("env map must be at least 8x4".into())),
                PfmImage::Mono(_) => Err(Error::Scene("env map must be a 3-channel PFM".into())),
            },
        }
    }

    /// Sets every material's roughness (objects and ground).
    pub fn with_uniform_roughness(mut self, roughness: f32) -> Self {
        for o in &mut self.objects {
            o.material.roughness = roughness;
        }
        if let Some(g) = &mut self.ground {
            g.material.roughness = roughness;
        }
        self.tags.roughness = Some(roughness);
        self
    }
}
