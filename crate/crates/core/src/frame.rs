//! Per-frame data model: G-buffer, noisy ray-traced channels and temporal
//! history, plus invariant validation.

use std::fmt;

use glam::{Vec2, Vec3};
use serde::{Deserialize, Serialize};

use crate::image::{Image, Pixel};

/// Object id reserved for background (primary ray miss).
pub const BACKGROUND_ID: u32 = 0;

const NORMAL_TOLERANCE: f32 = 1e-4;

/// Per-pixel geometric and material attributes from the primary visibility
/// pass.
///
/// `motion` points from the current pixel center to the same surface point in
/// the previous frame, in pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct GBufferFrame {
    pub depth: Image<f32>,
    pub normal: Image<Vec3>,
    pub motion: Image<Vec2>,
    pub object_id: Image<u32>,
    pub albedo: Image<Vec3>,
    pub roughness: Image<f32>,
    pub emissive: Image<Vec3>,
}

/// The subset of G-buffer attributes used for reprojection and edge stopping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceAttrs {
    pub depth: f32,
    pub normal: Vec3,
    pub object_id: u32,
}

impl SurfaceAttrs {
    #[inline]
    pub fn is_background(&self) -> bool {
        self.object_id == BACKGROUND_ID
    }
}

impl GBufferFrame {
    /// An all-background frame.
    pub fn empty(width: usize, height: usize) -> Self {
        GBufferFrame {
            depth: Image::filled(width, height, f32::INFINITY),
            normal: Image::new(width, height),
            motion: Image::new(width, height),
            object_id: Image::new(width, height),
            albedo: Image::new(width, height),
            roughness: Image::new(width, height),
            emissive: Image::new(width, height),
        }
    }

    pub fn width(&self) -> usize {
        self.depth.width()
    }

    pub fn height(&self) -> usize {
        self.depth.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.depth.dims()
    }

    #[inline]
    pub fn attrs(&self, x: usize, y: usize) -> SurfaceAttrs {
        SurfaceAttrs {
            depth: self.depth.get(x, y),
            normal: self.normal.get(x, y),
            object_id: self.object_id.get(x, y),
        }
    }

    #[inline]
    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        self.object_id.get(x, y) != BACKGROUND_ID
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Shadow,
    IndirectSpecular,
}

/// A 1spp (or `spp`) Monte Carlo estimate awaiting denoising.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyChannel<P> {
    pub kind: ChannelKind,
    pub data: Image<P>,
    pub spp: u32,
}

pub type ShadowChannel = NoisyChannel<f32>;
pub type SpecularChannel = NoisyChannel<Vec3>;

/// One pixel of accumulated temporal state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HistoryTexel<P> {
    pub color: P,
    pub moment1: f32,
    pub moment2: f32,
    /// Number of frames integrated; zero means no valid history.
    pub len: u32,
}

/// Accumulated color and luminance moments carried between frames.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalHistory<P> {
    pub texels: Image<HistoryTexel<P>>,
}

impl<P: Pixel> TemporalHistory<P> {
    pub fn empty(width: usize, height: usize) -> Self {
        TemporalHistory {
            texels: Image::new(width, height),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.texels.dims()
    }

    pub fn color(&self) -> Image<P> {
        self.texels.map(|t| t.color)
    }

    pub fn history_len(&self) -> Image<u32> {
        self.texels.map(|t| t.len)
    }
}

/// A single broken invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub frame: Option<usize>,
    pub channel: String,
    pub pixel: Option<(usize, usize)>,
    pub message: String,
}

impl Violation {
    fn at(channel: &str, x: usize, y: usize, message: impl Into<String>) -> Self {
        Violation {
            frame: None,
            channel: channel.to_owned(),
            pixel: Some((x, y)),
            message: message.into(),
        }
    }

    fn whole(channel: &str, message: impl Into<String>) -> Self {
        Violation {
            frame: None,
            channel: channel.to_owned(),
            pixel: None,
            message: message.into(),
        }
    }

    pub fn in_frame(mut self, frame: usize) -> Self {
        self.frame = Some(frame);
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(frame) = self.frame {
            write!(f, "frame {frame}: ")?;
        }
        write!(f, "channel `{}`", self.channel)?;
        if let Some((x, y)) = self.pixel {
            write!(f, " pixel ({x}, {y})")?;
        }
        write!(f, ": {}", self.message)
    }
}

/// The complete input set for one frame of the denoiser.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameInputs {
    pub gbuffer: GBufferFrame,
    pub shadow: ShadowChannel,
    pub specular: SpecularChannel,
    /// Configured shadow angle in degrees, constant over the frame.
    pub shadow_angle: Image<f32>,
}

fn check_dims<T: Copy>(
    out: &mut Vec<Violation>,
    channel: &str,
    img: &Image<T>,
    dims: (usize, usize),
) -> bool {
    if img.dims() != dims {
        out.push(Violation::whole(
            channel,
            format!("dimensions {:?} differ from G-buffer {:?}", img.dims(), dims),
        ));
        false
    } else {
        true
    }
}

fn check_finite<P: Pixel>(out: &mut Vec<Violation>, channel: &str, img: &Image<P>) {
    for (x, y, v) in img.enumerate() {
        if !v.is_finite() {
            out.push(Violation::at(channel, x, y, "non-finite value"));
        }
    }
}

/// Returns every invariant the G-buffer violates.
pub fn validate_gbuffer(g: &GBufferFrame) -> Vec<Violation> {
    let mut out = Vec::new();
    let dims = g.dims();
    let ok = [
        check_dims(&mut out, "normal", &g.normal, dims),
        check_dims(&mut out, "motion", &g.motion, dims),
        check_dims(&mut out, "object_id", &g.object_id, dims),
        check_dims(&mut out, "albedo", &g.albedo, dims),
        check_dims(&mut out, "roughness", &g.roughness, dims),
        check_dims(&mut out, "emissive", &g.emissive, dims),
    ];
    if ok.iter().any(|ok| !ok) {
        return out;
    }
    for (x, y, id) in g.object_id.enumerate() {
        if id == BACKGROUND_ID {
            continue;
        }
        let n = g.normal.get(x, y);
        if !n.is_finite() {
            out.push(Violation::at("normal", x, y, "non-finite value"));
        } else if (n.length() - 1.0).abs() > NORMAL_TOLERANCE {
            out.push(Violation::at(
                "normal",
                x,
                y,
                format!("normal length {} is not unit", n.length()),
            ));
        }
        let z = g.depth.get(x, y);
        if !z.is_finite() {
            out.push(Violation::at("depth", x, y, "non-finite value"));
        } else if z <= 0.0 {
            out.push(Violation::at("depth", x, y, format!("depth {z} is not positive")));
        }
    }
    for (x, y, r) in g.roughness.enumerate() {
        if !r.is_finite() {
            out.push(Violation::at("roughness", x, y, "non-finite value"));
        } else if !(0.0..=1.0).contains(&r) {
            out.push(Violation::at("roughness", x, y, format!("roughness {r} outside [0, 1]")));
        }
    }
    for (x, y, a) in g.albedo.enumerate() {
        if !a.is_finite() {
            out.push(Violation::at("albedo", x, y, "non-finite value"));
        } else if a.min_element() < 0.0 || a.max_element() > 1.0 {
            out.push(Violation::at("albedo", x, y, "albedo outside [0, 1]"));
        }
    }
    for (x, y, e) in g.emissive.enumerate() {
        if !e.is_finite() {
            out.push(Violation::at("emissive", x, y, "non-finite value"));
        } else if e.min_element() < 0.0 {
            out.push(Violation::at("emissive", x, y, "negative emission"));
        }
    }
    check_finite(&mut out, "motion", &g.motion.map(|m| m.extend(0.0)));
    out
}

/// Returns every invariant the frame violates; an empty list means the frame
/// is valid. Never fails.
pub fn validate_frame(frame: &FrameInputs) -> Vec<Violation> {
    let mut out = validate_gbuffer(&frame.gbuffer);
    let dims = frame.gbuffer.dims();
    if check_dims(&mut out, "shadow_1spp", &frame.shadow.data, dims) {
        for (x, y, v) in frame.shadow.data.enumerate() {
            if !v.is_finite() {
                out.push(Violation::at("shadow_1spp", x, y, "non-finite value"));
            } else if !(0.0..=1.0).contains(&v) {
                out.push(Violation::at("shadow_1spp", x, y, format!("visibility {v} outside [0, 1]")));
            }
        }
    }
    if check_dims(&mut out, "specular_1spp", &frame.specular.data, dims) {
        for (x, y, v) in frame.specular.data.enumerate() {
            if !v.is_finite() {
                out.push(Violation::at("specular_1spp", x, y, "non-finite value"));
            } else if v.min_element() < 0.0 {
                out.push(Violation::at("specular_1spp", x, y, "negative radiance"));
            }
        }
    }
    if check_dims(&mut out, "shadow_angle", &frame.shadow_angle, dims) {
        check_finite(&mut out, "shadow_angle", &frame.shadow_angle);
    }
    if frame.shadow.kind != ChannelKind::Shadow {
        out.push(Violation::whole("shadow_1spp", "channel kind is not Shadow"));
    }
    if frame.specular.kind != ChannelKind::IndirectSpecular {
        out.push(Violation::whole("specular_1spp", "channel kind is not IndirectSpecular"));
    }
    out
}
