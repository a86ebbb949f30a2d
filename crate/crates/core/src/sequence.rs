//! On-disk frame sequences: a `manifest.json` plus one directory of PFM
//! channels per frame.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use glam::{Vec2, Vec3};
use serde::{Deserialize, Serialize};

use crate::config::DenoiseConfig;
use crate::error::{Error, Result};
use crate::frame::{validate_frame, ChannelKind, FrameInputs, GBufferFrame, NoisyChannel};
use crate::image::Image;
use crate::pfm::{self, PfmImage};
use crate::scene::{EnvMap, SceneDescriptor};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ENV_MAP_FILE: &str = "env_map.pfm";

pub const DEPTH: &str = "depth";
pub const NORMAL: &str = "normal";
pub const MOTION: &str = "motion";
pub const OBJECT_ID: &str = "object_id";
pub const ALBEDO: &str = "albedo";
pub const ROUGHNESS: &str = "roughness";
pub const EMISSIVE: &str = "emissive";
pub const SHADOW_1SPP: &str = "shadow_1spp";
pub const SPECULAR_1SPP: &str = "specular_1spp";
pub const SHADOW_ANGLE: &str = "shadow_angle";
pub const REFERENCE: &str = "reference";
pub const REFERENCE_SHADOW: &str = "reference_shadow";
pub const REFERENCE_SPECULAR: &str = "reference_specular";
pub const SHADOW: &str = "shadow";
pub const SPECULAR: &str = "specular";
pub const DIRECT: &str = "direct";
pub const COMPOSITE: &str = "composite";
pub const FINAL: &str = "final";

/// Channels written by the synthesizer for every frame, with component counts.
pub const INPUT_CHANNELS: [(&str, usize); 10] = [
    (DEPTH, 1),
    (NORMAL, 3),
    (MOTION, 3),
    (OBJECT_ID, 1),
    (ALBEDO, 3),
    (ROUGHNESS, 1),
    (EMISSIVE, 3),
    (SHADOW_1SPP, 1),
    (SPECULAR_1SPP, 3),
    (SHADOW_ANGLE, 1),
];

pub const REFERENCE_CHANNELS: [(&str, usize); 3] = [(REFERENCE, 3), (REFERENCE_SHADOW, 1), (REFERENCE_SPECULAR, 3)];

/// Channels written by the denoiser for every frame.
pub const OUTPUT_CHANNELS: [(&str, usize); 5] = [(SHADOW, 1), (SPECULAR, 3), (DIRECT, 3), (COMPOSITE, 3), (FINAL, 3)];

pub type ChannelSet = BTreeMap<String, PfmImage>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    pub components: usize,
}

impl ChannelSpec {
    pub fn new(name: &str, components: usize) -> Self {
        ChannelSpec {
            name: name.to_owned(),
            components,
        }
    }

    pub fn list(specs: &[(&str, usize)]) -> Vec<ChannelSpec> {
        specs.iter().map(|&(n, c)| ChannelSpec::new(n, c)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FireflyInfo {
    pub rate: f64,
    pub magnitude: f32,
}

/// How the inputs were rendered.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderInfo {
    pub seed: u64,
    pub spp: u32,
    pub ibl_secondary: bool,
    #[serde(default)]
    pub reference_spp: Option<u32>,
    #[serde(default)]
    pub fireflies: Option<FireflyInfo>,
}

/// How a denoised sequence was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenoiseInfo {
    #[serde(default)]
    pub preset: Option<String>,
    pub config: DenoiseConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub channels: Vec<ChannelSpec>,
    /// Frame directory names, in order.
    pub frames: Vec<String>,
    #[serde(default)]
    pub scene: Option<SceneDescriptor>,
    #[serde(default)]
    pub render: Option<RenderInfo>,
    #[serde(default)]
    pub denoise: Option<DenoiseInfo>,
    #[serde(default)]
    pub env_map: Option<String>,
}

impl Manifest {
    pub fn new(width: usize, height: usize, channels: Vec<ChannelSpec>) -> Self {
        Manifest {
            format_version: FORMAT_VERSION,
            width,
            height,
            frame_count: 0,
            channels,
            frames: Vec::new(),
            scene: None,
            render: None,
            denoise: None,
            env_map: None,
        }
    }

    pub fn has_channel(&self, name: &str) -> bool {
        self.channels.iter().any(|c| c.name == name)
    }
}

pub fn frame_dir_name(index: usize) -> String {
    format!("frame_{index:04}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    pub manifest: Manifest,
    pub frames: Vec<ChannelSet>,
    pub env: Option<EnvMap>,
}

impl FrameSequence {
    pub fn new(manifest: Manifest) -> Self {
        FrameSequence {
            manifest,
            frames: Vec::new(),
            env: None,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.manifest.width, self.manifest.height)
    }

    pub fn push_frame(&mut self, frame: ChannelSet) {
        self.manifest.frames.push(frame_dir_name(self.frames.len()));
        self.frames.push(frame);
        self.manifest.frame_count = self.frames.len();
    }

    pub fn channel(&self, frame: usize, name: &str) -> Result<&PfmImage> {
        self.frames
            .get(frame)
            .and_then(|set| set.get(name))
            .ok_or_else(|| Error::MissingChannel {
                frame,
                channel: name.to_owned(),
            })
    }

    pub fn mono(&self, frame: usize, name: &str) -> Result<&Image<f32>> {
        as_mono(self.channel(frame, name)?, frame, name)
    }

    pub fn rgb(&self, frame: usize, name: &str) -> Result<&Image<Vec3>> {
        as_rgb(self.channel(frame, name)?, frame, name)
    }

    /// Typed denoiser inputs for one frame.
    pub fn frame_inputs(&self, frame: usize) -> Result<FrameInputs> {
        let spp = self.manifest.render.as_ref().map_or(1, |r| r.spp);
        let set = self
            .frames
            .get(frame)
            .ok_or_else(|| Error::Domain(format!("frame {frame} out of range")))?;
        inputs_from_channels(set, frame, spp)
    }

    /// Checks shape and, for input frames, the per-pixel invariants.
    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::EmptySequence);
        }
        if self.manifest.frame_count != self.frames.len() || self.manifest.frames.len() != self.frames.len() {
            return Err(Error::Domain(format!(
                "manifest lists {} frames but {} are present",
                self.manifest.frame_count,
                self.frames.len()
            )));
        }
        let dims = self.dims();
        let is_input = INPUT_CHANNELS.iter().all(|(n, _)| self.manifest.has_channel(n));
        let mut violations = Vec::new();
        for (i, set) in self.frames.iter().enumerate() {
            for spec in &self.manifest.channels {
                let img = set.get(&spec.name).ok_or_else(|| Error::MissingChannel {
                    frame: i,
                    channel: spec.name.clone(),
                })?;
                check_channel(img, i, spec, dims)?;
            }
            if is_input {
                let inputs = self.frame_inputs(i)?;
                violations.extend(validate_frame(&inputs).into_iter().map(|v| v.in_frame(i)));
            }
        }
        if !violations.is_empty() {
            return Err(Error::Invalid(violations));
        }
        Ok(())
    }
}

fn check_channel(img: &PfmImage, frame: usize, spec: &ChannelSpec, dims: (usize, usize)) -> Result<()> {
    if img.channels() != spec.components {
        return Err(Error::Domain(format!(
            "channel `{}` in frame {frame} has {} components, expected {}",
            spec.name,
            img.channels(),
            spec.components
        )));
    }
    if img.dims() != dims {
        return Err(Error::DimensionMismatch {
            frame,
            channel: spec.name.clone(),
            expected: dims,
            found: img.dims(),
        });
    }
    Ok(())
}

fn as_mono<'a>(img: &'a PfmImage, frame: usize, name: &str) -> Result<&'a Image<f32>> {
    match img {
        PfmImage::Mono(m) => Ok(m),
        PfmImage::Rgb(_) => Err(Error::Domain(format!(
            "channel `{name}` in frame {frame} has 3 components, expected 1"
        ))),
    }
}

fn as_rgb<'a>(img: &'a PfmImage, frame: usize, name: &str) -> Result<&'a Image<Vec3>> {
    match img {
        PfmImage::Rgb(m) => Ok(m),
        PfmImage::Mono(_) => Err(Error::Domain(format!(
            "channel `{name}` in frame {frame} has 1 component, expected 3"
        ))),
    }
}

/// Flattens typed inputs into named channels. Object ids are stored as
/// floats, exact below 2^24.
pub fn inputs_to_channels(inputs: &FrameInputs) -> ChannelSet {
    let g = &inputs.gbuffer;
    let mut set = ChannelSet::new();
    let mut put = |name: &str, img: PfmImage| {
        set.insert(name.to_owned(), img);
    };
    put(DEPTH, PfmImage::Mono(g.depth.clone()));
    put(NORMAL, PfmImage::Rgb(g.normal.clone()));
    put(MOTION, PfmImage::Rgb(g.motion.map(|m| m.extend(0.0))));
    put(OBJECT_ID, PfmImage::Mono(g.object_id.map(|id| id as f32)));
    put(ALBEDO, PfmImage::Rgb(g.albedo.clone()));
    put(ROUGHNESS, PfmImage::Mono(g.roughness.clone()));
    put(EMISSIVE, PfmImage::Rgb(g.emissive.clone()));
    put(SHADOW_1SPP, PfmImage::Mono(inputs.shadow.data.clone()));
    put(SPECULAR_1SPP, PfmImage::Rgb(inputs.specular.data.clone()));
    put(SHADOW_ANGLE, PfmImage::Mono(inputs.shadow_angle.clone()));
    set
}

pub fn inputs_from_channels(set: &ChannelSet, frame: usize, spp: u32) -> Result<FrameInputs> {
    let get = |name: &str| {
        set.get(name).ok_or_else(|| Error::MissingChannel {
            frame,
            channel: name.to_owned(),
        })
    };
    let mono = |name: &str| -> Result<Image<f32>> { Ok(as_mono(get(name)?, frame, name)?.clone()) };
    let rgb = |name: &str| -> Result<Image<Vec3>> { Ok(as_rgb(get(name)?, frame, name)?.clone()) };
    let ids = mono(OBJECT_ID)?;
    if let Some((x, y, v)) = ids.enumerate().find(|&(_, _, v)| !(v >= 0.0 && v.fract() == 0.0 && v < 16_777_216.0)) {
        return Err(Error::Domain(format!(
            "object id {v} at ({x}, {y}) in frame {frame} is not a non-negative integer"
        )));
    }
    let gbuffer = GBufferFrame {
        depth: mono(DEPTH)?,
        normal: rgb(NORMAL)?,
        motion: rgb(MOTION)?.map(|m| Vec2::new(m.x, m.y)),
        object_id: ids.map(|v| v as u32),
        albedo: rgb(ALBEDO)?,
        roughness: mono(ROUGHNESS)?,
        emissive: rgb(EMISSIVE)?,
    };
    Ok(FrameInputs {
        gbuffer,
        shadow: NoisyChannel {
            kind: ChannelKind::Shadow,
            data: mono(SHADOW_1SPP)?,
            spp,
        },
        specular: NoisyChannel {
            kind: ChannelKind::IndirectSpecular,
            data: rgb(SPECULAR_1SPP)?,
            spp,
        },
        shadow_angle: mono(SHADOW_ANGLE)?,
    })
}

/// Validates and writes `seq` under `dir`, creating it if needed.
pub fn save_sequence(seq: &FrameSequence, dir: &Path) -> Result<()> {
    seq.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = seq.manifest.clone();
    for (name, set) in manifest.frames.iter().zip(&seq.frames) {
        let fdir = dir.join(name);
        fs::create_dir_all(&fdir).map_err(|e| Error::io(&fdir, e))?;
        for spec in &manifest.channels {
            pfm::write(&fdir.join(format!("{}.pfm", spec.name)), &set[&spec.name])?;
        }
    }
    manifest.env_map = None;
    if let Some(env) = &seq.env {
        pfm::write(&dir.join(ENV_MAP_FILE), &PfmImage::Rgb(env.image.clone()))?;
        manifest.env_map = Some(ENV_MAP_FILE.to_owned());
    }
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path, source })
}

/// Reads and validates a sequence written by [`save_sequence`].
pub fn load_sequence(dir: &Path) -> Result<FrameSequence> {
    let manifest = load_manifest(dir)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Domain(format!(
            "unsupported sequence format version {}",
            manifest.format_version
        )));
    }
    if manifest.frames.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut frames = Vec::with_capacity(manifest.frames.len());
    for name in &manifest.frames {
        let fdir = dir.join(name);
        let mut set = ChannelSet::new();
        for spec in &manifest.channels {
            let img = pfm::read(&fdir.join(format!("{}.pfm", spec.name)))?;
            set.insert(spec.name.clone(), img);
        }
        frames.push(set);
    }
    let env = match &manifest.env_map {
        Some(file) => match pfm::read(&dir.join(file))? {
            PfmImage::Rgb(img) => Some(EnvMap::new(img)),
            PfmImage::Mono(_) => return Err(Error::pfm(dir.join(file), "env map must have 3 channels")),
        },
        None => None,
    };
    let seq = FrameSequence { manifest, frames, env };
    seq.validate()?;
    Ok(seq)
}
