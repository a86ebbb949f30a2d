//! Per-frame orchestration of every pass, in order, over a whole sequence.

use std::time::Instant;

use glam::Vec3;
use serde::{Deserialize, Serialize};

use crate::compose::{self, PointLight};
use crate::config::{DenoiseConfig, Feedback, ReinhardInverse};
use crate::error::{Error, Result};
use crate::frame::{ChannelKind, FrameInputs, GBufferFrame, HistoryTexel, TemporalHistory};
use crate::image::{Image, Pixel};
use crate::metrics;
use crate::pfm::PfmImage;
use crate::scene::{Camera, EnvMap, SceneDescriptor};
use crate::sequence::{self, ChannelSet, ChannelSpec, DenoiseInfo, FrameSequence, Manifest};
use crate::spatial::{self, PassStats};
use crate::temporal::{self, ConsistencyParams, TemporalParams};
use crate::tonemap;

/// One pass of the per-frame schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    ReinhardForward,
    TemporalShadow,
    TemporalSpecular,
    SpatialShadow,
    SpatialSpecular,
    ReinhardInverse,
    ShadeDirect,
    Composite,
    Taa,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::ReinhardForward => "reinhard_forward",
            Stage::TemporalShadow => "temporal_shadow",
            Stage::TemporalSpecular => "temporal_specular",
            Stage::SpatialShadow => "spatial_shadow",
            Stage::SpatialSpecular => "spatial_specular",
            Stage::ReinhardInverse => "reinhard_inverse",
            Stage::ShadeDirect => "shade_direct",
            Stage::Composite => "composite",
            Stage::Taa => "taa",
        }
    }
}

/// Which noisy channels go through the denoiser; unselected ones pass
/// through raw.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChannelSelection {
    pub shadow: bool,
    pub specular: bool,
}

impl Default for ChannelSelection {
    fn default() -> Self {
        ChannelSelection {
            shadow: true,
            specular: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    /// Spatial iteration index, for spatial stages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<u32>,
    pub ms: f64,
    pub taps: u64,
}

/// Camera, light and background for one frame.
#[derive(Clone, Debug)]
pub struct FrameContext {
    pub camera: Camera,
    pub light: PointLight,
    pub sky: Image<Vec3>,
}

impl FrameContext {
    pub fn new(scene: &SceneDescriptor, env: &EnvMap, frame: usize) -> Self {
        FrameContext {
            camera: scene.camera(frame),
            light: PointLight::of(scene, frame),
            sky: compose::sky_image(scene, frame, env),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FrameOutput {
    pub shadow: Image<f32>,
    pub specular: Image<Vec3>,
    pub direct: Image<Vec3>,
    pub composite: Image<Vec3>,
    pub final_image: Image<Vec3>,
    pub trace: Vec<Stage>,
    pub timings: Vec<StageTiming>,
    /// Named debug buffers; empty unless dumping is enabled.
    pub intermediates: ChannelSet,
}

impl FrameOutput {
    pub fn to_channels(&self) -> ChannelSet {
        let mut set = self.intermediates.clone();
        set.insert(sequence::SHADOW.into(), PfmImage::Mono(self.shadow.clone()));
        set.insert(sequence::SPECULAR.into(), PfmImage::Rgb(self.specular.clone()));
        set.insert(sequence::DIRECT.into(), PfmImage::Rgb(self.direct.clone()));
        set.insert(sequence::COMPOSITE.into(), PfmImage::Rgb(self.composite.clone()));
        set.insert(sequence::FINAL.into(), PfmImage::Rgb(self.final_image.clone()));
        set
    }

    pub fn spatial_taps(&self) -> u64 {
        self.timings
            .iter()
            .filter(|t| matches!(t.stage, Stage::SpatialShadow | Stage::SpatialSpecular))
            .map(|t| t.taps)
            .sum()
    }
}

/// Names of the debug buffers written per frame when dumping.
pub fn intermediate_channels(config: &DenoiseConfig, selection: ChannelSelection) -> Vec<ChannelSpec> {
    let mut out = Vec::new();
    for (on, prefix, comps) in [(selection.shadow, "shadow", 1), (selection.specular, "specular", 3)] {
        if !on {
            continue;
        }
        if prefix == "specular" && config.reinhard {
            out.push(ChannelSpec::new("specular_tonemapped", 3));
        }
        out.push(ChannelSpec::new(&format!("{prefix}_temporal"), comps));
        out.push(ChannelSpec::new(&format!("{prefix}_variance"), 1));
        out.push(ChannelSpec::new(&format!("{prefix}_history_len"), 1));
        out.push(ChannelSpec::new(&format!("{prefix}_feedback"), comps));
    }
    out
}

struct ChannelState<P> {
    history: Option<TemporalHistory<P>>,
}

struct Filtered<P> {
    channel: Image<P>,
    passes: Vec<PassStats>,
    temporal_ms: f64,
}

/// Stateful per-sequence denoiser; feed frames in order.
pub struct Denoiser {
    config: DenoiseConfig,
    selection: ChannelSelection,
    dump: bool,
    shadow: ChannelState<f32>,
    specular: ChannelState<Vec3>,
    prev_gbuf: Option<GBufferFrame>,
    prev_taa: Option<Image<Vec3>>,
}

impl Denoiser {
    pub fn new(config: DenoiseConfig, selection: ChannelSelection) -> Result<Self> {
        config.validate()?;
        Ok(Denoiser {
            config,
            selection,
            dump: false,
            shadow: ChannelState { history: None },
            specular: ChannelState { history: None },
            prev_gbuf: None,
            prev_taa: None,
        })
    }

    pub fn with_intermediates(mut self, dump: bool) -> Self {
        self.dump = dump;
        self
    }

    pub fn config(&self) -> &DenoiseConfig {
        &self.config
    }

    fn filter<P: Pixel>(
        config: &DenoiseConfig,
        state: &mut ChannelState<P>,
        prev_gbuf: Option<&GBufferFrame>,
        noisy: &Image<P>,
        inputs: &FrameInputs,
        kind: ChannelKind,
        dump: Option<(&str, &mut ChannelSet, fn(Image<P>) -> PfmImage)>,
    ) -> Result<Filtered<P>> {
        let gbuf = &inputs.gbuffer;
        let t0 = Instant::now();
        let prev = state.history.as_ref().zip(prev_gbuf);
        let tparams = TemporalParams::from_config(config);
        let temporal = temporal::temporal_pass(noisy, gbuf, prev, &tparams);
        let temporal_ms = t0.elapsed().as_secs_f64() * 1e3;
        let color = temporal.color();
        let out = spatial::denoise_channel(&color, &temporal.variance, gbuf, kind, &inputs.shadow_angle, config, false)?;

        let mut texels = temporal.history.texels;
        if config.feedback == Feedback::FirstIteration {
            for (t, &c) in texels.data_mut().iter_mut().zip(out.feedback.data()) {
                t.color = c;
            }
        }
        if let Some((prefix, set, wrap)) = dump {
            set.insert(format!("{prefix}_temporal"), wrap(color));
            set.insert(format!("{prefix}_variance"), PfmImage::Mono(temporal.variance.clone()));
            set.insert(
                format!("{prefix}_history_len"),
                PfmImage::Mono(texels.map(|t: HistoryTexel<P>| t.len as f32)),
            );
            set.insert(format!("{prefix}_feedback"), wrap(out.feedback.clone()));
        }
        state.history = Some(TemporalHistory { texels });
        Ok(Filtered {
            channel: out.channel,
            passes: out.passes,
            temporal_ms,
        })
    }

    /// Runs every pass for the next frame of the sequence.
    pub fn process(&mut self, inputs: &FrameInputs, ctx: &FrameContext) -> Result<FrameOutput> {
        let gbuf = &inputs.gbuffer;
        if ctx.sky.dims() != gbuf.dims() {
            return Err(Error::Domain("frame context size differs from the G-buffer".into()));
        }
        let cfg = &self.config;
        let mut trace = Vec::new();
        let mut timings = Vec::new();
        let mut intermediates = ChannelSet::new();
        let mut timed = |stage: Stage, ms: f64, taps: u64, trace: &mut Vec<Stage>| {
            trace.push(stage);
            timings.push(StageTiming {
                stage,
                iteration: None,
                ms,
                taps,
            });
        };

        let mut specular_in = inputs.specular.data.clone();
        let tonemapped = self.selection.specular && cfg.reinhard;
        if tonemapped {
            let t0 = Instant::now();
            specular_in = tonemap::forward_image(&specular_in, cfg.luma_multiplier);
            timed(Stage::ReinhardForward, ms_since(t0), 0, &mut trace);
            if self.dump {
                intermediates.insert("specular_tonemapped".into(), PfmImage::Rgb(specular_in.clone()));
            }
        }

        let prev_gbuf = self.prev_gbuf.as_ref();
        let shadow = if self.selection.shadow {
            let dump = self.dump.then_some(("shadow", &mut intermediates, PfmImage::Mono as fn(_) -> _));
            let f = Self::filter(cfg, &mut self.shadow, prev_gbuf, &inputs.shadow.data, inputs, ChannelKind::Shadow, dump)?;
            timed(Stage::TemporalShadow, f.temporal_ms, 0, &mut trace);
            Some(f)
        } else {
            None
        };
        let specular = if self.selection.specular {
            let dump = self.dump.then_some(("specular", &mut intermediates, PfmImage::Rgb as fn(_) -> _));
            let f = Self::filter(cfg, &mut self.specular, prev_gbuf, &specular_in, inputs, ChannelKind::IndirectSpecular, dump)?;
            timed(Stage::TemporalSpecular, f.temporal_ms, 0, &mut trace);
            Some(f)
        } else {
            None
        };
        // spatial stages ran inside `filter`; record them after both temporal
        // stages to keep the schedule's order
        let mut spatial = |stage: Stage, passes: &[PassStats], trace: &mut Vec<Stage>| {
            trace.push(stage);
            for p in passes {
                timings.push(StageTiming {
                    stage,
                    iteration: Some(p.iteration),
                    ms: p.elapsed.as_secs_f64() * 1e3,
                    taps: p.taps,
                });
            }
        };
        let shadow_out = match shadow {
            Some(f) => {
                spatial(Stage::SpatialShadow, &f.passes, &mut trace);
                f.channel
            }
            None => inputs.shadow.data.clone(),
        };
        let specular_out = match specular {
            Some(f) => {
                spatial(Stage::SpatialSpecular, &f.passes, &mut trace);
                f.channel
            }
            None => specular_in,
        };
        let mut timed = |stage: Stage, ms: f64, trace: &mut Vec<Stage>| {
            trace.push(stage);
            timings.push(StageTiming {
                stage,
                iteration: None,
                ms,
                taps: 0,
            });
        };
        let specular_out = if tonemapped {
            let t0 = Instant::now();
            let out = match cfg.reinhard_inverse {
                ReinhardInverse::Approximate => tonemap::inverse_approx_image(&specular_out, cfg.reinhard_weight),
                ReinhardInverse::Exact => tonemap::inverse_exact_image(&specular_out, cfg.luma_multiplier)?,
            };
            timed(Stage::ReinhardInverse, ms_since(t0), &mut trace);
            out
        } else {
            specular_out
        };

        let t0 = Instant::now();
        let direct = compose::shade_direct(gbuf, &ctx.camera, &ctx.light);
        timed(Stage::ShadeDirect, ms_since(t0), &mut trace);
        let t0 = Instant::now();
        let composite = compose::composite(&direct, &shadow_out, &specular_out, gbuf, &ctx.sky);
        timed(Stage::Composite, ms_since(t0), &mut trace);
        let t0 = Instant::now();
        let final_image = if cfg.taa {
            let consistency = ConsistencyParams {
                depth_threshold: cfg.depth_threshold,
                normal_threshold: cfg.normal_threshold,
            };
            let prev = self.prev_taa.as_ref().zip(self.prev_gbuf.as_ref());
            compose::taa(&composite, gbuf, prev, &consistency)
        } else {
            composite.clone()
        };
        timed(Stage::Taa, ms_since(t0), &mut trace);

        self.prev_taa = Some(final_image.clone());
        self.prev_gbuf = Some(gbuf.clone());
        Ok(FrameOutput {
            shadow: shadow_out,
            specular: specular_out,
            direct,
            composite,
            final_image,
            trace,
            timings,
            intermediates,
        })
    }
}

fn ms_since(t0: Instant) -> f64 {
    t0.elapsed().as_secs_f64() * 1e3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub frame: usize,
    pub timings: Vec<StageTiming>,
    /// Final image against the sequence's reference, when one exists.
    #[serde(default)]
    pub ssim: Option<f64>,
    #[serde(default)]
    pub mse: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    #[serde(default)]
    pub preset: Option<String>,
    pub config: DenoiseConfig,
    pub frames: Vec<FrameReport>,
}

pub struct PipelineResult {
    pub sequence: FrameSequence,
    pub report: PipelineReport,
    pub traces: Vec<Vec<Stage>>,
}

/// Scene and environment needed to compose frames of `seq`.
pub fn scene_and_env(seq: &FrameSequence) -> Result<(SceneDescriptor, EnvMap)> {
    let scene = seq
        .manifest
        .scene
        .clone()
        .ok_or_else(|| Error::Domain("sequence manifest has no scene description".into()))?;
    if (scene.width, scene.height) != seq.dims() {
        return Err(Error::Domain(format!(
            "scene is {}x{} but the sequence is {}x{}",
            scene.width,
            scene.height,
            seq.manifest.width,
            seq.manifest.height
        )));
    }
    let env = match &seq.env {
        Some(env) => env.clone(),
        None => scene.load_env()?,
    };
    Ok((scene, env))
}

/// Denoises every frame of `seq` in order.
pub fn run_pipeline(
    seq: &FrameSequence,
    config: &DenoiseConfig,
    selection: ChannelSelection,
    dump_intermediates: bool,
    preset: Option<&str>,
) -> Result<PipelineResult> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let (scene, env) = scene_and_env(seq)?;
    let mut denoiser = Denoiser::new(config.clone(), selection)?.with_intermediates(dump_intermediates);

    let mut channels = ChannelSpec::list(&sequence::OUTPUT_CHANNELS);
    if dump_intermediates {
        channels.extend(intermediate_channels(config, selection));
    }
    let has_reference = seq.manifest.has_channel(sequence::REFERENCE);
    if has_reference {
        channels.push(ChannelSpec::new(sequence::REFERENCE, 3));
    }
    let mut manifest = Manifest::new(seq.manifest.width, seq.manifest.height, channels);
    manifest.scene = seq.manifest.scene.clone();
    manifest.render = seq.manifest.render.clone();
    manifest.denoise = Some(DenoiseInfo {
        preset: preset.map(str::to_owned),
        config: config.clone(),
    });
    let mut out = FrameSequence::new(manifest);
    out.env = Some(env.clone());

    let mut frames = Vec::with_capacity(seq.len());
    let mut traces = Vec::with_capacity(seq.len());
    for i in 0..seq.len() {
        let inputs = seq.frame_inputs(i)?;
        let ctx = FrameContext::new(&scene, &env, i);
        let result = denoiser.process(&inputs, &ctx)?;
        let mut set = result.to_channels();
        let (mut ssim, mut mse) = (None, None);
        if has_reference {
            let reference = seq.rgb(i, sequence::REFERENCE)?;
            ssim = Some(metrics::ssim(&result.final_image, reference)?);
            mse = Some(metrics::mse(&result.final_image, reference)?);
            set.insert(sequence::REFERENCE.into(), PfmImage::Rgb(reference.clone()));
        }
        frames.push(FrameReport {
            frame: i,
            timings: result.timings,
            ssim,
            mse,
        });
        traces.push(result.trace);
        out.push_frame(set);
    }
    Ok(PipelineResult {
        sequence: out,
        report: PipelineReport {
            preset: preset.map(str::to_owned),
            config: config.clone(),
            frames,
        },
        traces,
    })
}
