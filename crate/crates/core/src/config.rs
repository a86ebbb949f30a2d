//! Denoiser tunables and the named technique stacks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RectifyMode {
    Off,
    Clamp,
    Clip,
}

/// Which spatial iteration's output is fed back as next frame's history color.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    None,
    FirstIteration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReinhardInverse {
    /// `c * (1 + luma(c)) * weight`, approximate.
    Approximate,
    /// Algebraic inverse of the forward map.
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiseConfig {
    pub alpha: f32,
    pub moments_alpha: f32,
    pub clamp_gamma: f32,
    pub rectify_mode: RectifyMode,
    pub sigma_z: f32,
    pub sigma_n: f32,
    pub sigma_l: f32,
    pub iterations: u32,
    pub adaptive_start: bool,
    pub roughness_start_threshold: f32,
    /// Degrees.
    pub shadow_angle_start_threshold: f32,
    pub separable: bool,
    pub reinhard: bool,
    pub luma_multiplier: f32,
    pub reinhard_weight: f32,
    pub reinhard_inverse: ReinhardInverse,
    pub ibl_adaptive_iterations: bool,
    pub spatial_variance_min_history: u32,
    pub feedback: Feedback,
    /// Relative depth difference above which reprojection is rejected.
    pub depth_threshold: f32,
    /// Minimum normal dot product for reprojection to be accepted.
    pub normal_threshold: f32,
    pub history_cap: u32,
    pub taa: bool,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            alpha: 0.2,
            moments_alpha: 0.2,
            clamp_gamma: 1.0,
            rectify_mode: RectifyMode::Off,
            sigma_z: 1.0,
            sigma_n: 128.0,
            sigma_l: 4.0,
            iterations: 4,
            adaptive_start: false,
            roughness_start_threshold: 0.2,
            shadow_angle_start_threshold: 6.0,
            separable: false,
            reinhard: false,
            luma_multiplier: 1.0,
            reinhard_weight: 1.0,
            reinhard_inverse: ReinhardInverse::Approximate,
            ibl_adaptive_iterations: false,
            spatial_variance_min_history: 4,
            feedback: Feedback::FirstIteration,
            depth_threshold: 0.1,
            normal_threshold: 0.9,
            history_cap: 256,
            taa: true,
        }
    }
}

pub const MAX_ITERATIONS: u32 = 8;

impl DenoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f32| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} must be in (0, 1]")))
            }
        };
        let positive = |name: &str, v: f32| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} must be positive")))
            }
        };
        let non_negative = |name: &str, v: f32| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} must be non-negative")))
            }
        };
        unit("alpha", self.alpha)?;
        unit("moments_alpha", self.moments_alpha)?;
        positive("clamp_gamma", self.clamp_gamma)?;
        positive("sigma_z", self.sigma_z)?;
        positive("sigma_n", self.sigma_n)?;
        positive("sigma_l", self.sigma_l)?;
        non_negative("roughness_start_threshold", self.roughness_start_threshold)?;
        non_negative("shadow_angle_start_threshold", self.shadow_angle_start_threshold)?;
        non_negative("luma_multiplier", self.luma_multiplier)?;
        non_negative("reinhard_weight", self.reinhard_weight)?;
        positive("depth_threshold", self.depth_threshold)?;
        if !(-1.0..=1.0).contains(&self.normal_threshold) {
            return Err(Error::Config(format!(
                "normal_threshold = {} must be in [-1, 1]",
                self.normal_threshold
            )));
        }
        if self.iterations > MAX_ITERATIONS {
            return Err(Error::Config(format!(
                "iterations = {} exceeds {MAX_ITERATIONS}",
                self.iterations
            )));
        }
        if self.spatial_variance_min_history < 1 {
            return Err(Error::Config("spatial_variance_min_history must be >= 1".into()));
        }
        if self.history_cap < 1 {
            return Err(Error::Config("history_cap must be >= 1".into()));
        }
        Ok(())
    }

    /// Parses a JSON document; absent fields take their defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: DenoiseConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("config JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `field=value` overrides, with the value parsed as JSON (bare
    /// words are taken as strings).
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut doc = serde_json::to_value(self).expect("config serializes");
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not field=value")))?;
            let key = key.trim();
            let obj = doc.as_object_mut().expect("config is an object");
            if !obj.contains_key(key) {
                return Err(Error::Config(format!("unknown config field `{key}`")));
            }
            let value = serde_json::from_str(raw.trim())
                .unwrap_or_else(|_| serde_json::Value::String(raw.trim().to_owned()));
            obj.insert(key.to_owned(), value);
        }
        let cfg: DenoiseConfig = serde_json::from_value(doc)
            .map_err(|e| Error::Config(format!("override: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The incremental technique stacks, each built on the previous one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "svgf")]
    Svgf,
    #[serde(rename = "svgf+rectify")]
    Rectify,
    #[serde(rename = "svgf+rectify+adaptive")]
    Adaptive,
    #[serde(rename = "svgf+rectify+adaptive+separable")]
    Separable,
    #[serde(rename = "svgf+rectify+adaptive+separable+reinhard")]
    Reinhard,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Svgf,
        Preset::Rectify,
        Preset::Adaptive,
        Preset::Separable,
        Preset::Reinhard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Svgf => "svgf",
            Preset::Rectify => "svgf+rectify",
            Preset::Adaptive => "svgf+rectify+adaptive",
            Preset::Separable => "svgf+rectify+adaptive+separable",
            Preset::Reinhard => "svgf+rectify+adaptive+separable+reinhard",
        }
    }

    /// Applies this stack's toggles on top of `base`.
    pub fn apply(self, base: &DenoiseConfig) -> DenoiseConfig {
        let rank = Preset::ALL.iter().position(|&p| p == self).unwrap();
        DenoiseConfig {
            rectify_mode: if rank >= 1 {
                RectifyMode::Clamp
            } else {
                RectifyMode::Off
            },
            adaptive_start: rank >= 2,
            separable: rank >= 3,
            reinhard: rank >= 4,
            ..base.clone()
        }
    }

    pub fn config(self) -> DenoiseConfig {
        self.apply(&DenoiseConfig::default())
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset `{s}`")))
    }
}
