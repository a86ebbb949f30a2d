//! Library side of the command-line subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::DenoiseConfig;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::{self, BenchStats, EvalRecord};
use crate::pfm::PfmImage;
use crate::pipeline::{self, ChannelSelection, PipelineReport, Stage};
use crate::rng::hash_key;
use crate::scene::{inject_fireflies, RenderParams, Renderer, SceneDescriptor, REFERENCE_SPP};
use crate::sequence::{self, ChannelSpec, FireflyInfo, FrameSequence, Manifest, RenderInfo};

pub const REPORT_FILE: &str = "report.json";

#[derive(Clone, Debug)]
pub struct SynthOptions {
    pub scene: SceneDescriptor,
    /// Overrides the scene's animation length.
    pub frames: Option<usize>,
    pub spp: u32,
    pub seed: u64,
    pub ibl_secondary: bool,
    pub reference: bool,
    pub fireflies: Option<FireflyInfo>,
}

impl SynthOptions {
    pub fn new(scene: SceneDescriptor, seed: u64) -> Self {
        SynthOptions {
            scene,
            frames: None,
            spp: 1,
            seed,
            ibl_secondary: false,
            reference: true,
            fireflies: None,
        }
    }
}

/// Seed of the reference renders, decorrelated from the noisy sample streams.
pub fn reference_seed(seed: u64) -> u64 {
    hash_key(&[seed, 0x5EF])
}

fn firefly_seed(seed: u64, frame: usize) -> u64 {
    hash_key(&[seed, 0xF1, frame as u64])
}

/// Renders the noisy inputs (and optionally references) for every frame.
pub fn synthesize(opts: &SynthOptions) -> Result<FrameSequence> {
    let mut scene = opts.scene.clone();
    if let Some(n) = opts.frames {
        scene.frame_count = n;
    }
    scene.validate()?;
    if opts.spp == 0 {
        return Err(Error::Config("spp must be at least 1".into()));
    }
    let renderer = Renderer::new(&scene)?;
    let mut channels = ChannelSpec::list(&sequence::INPUT_CHANNELS);
    if opts.reference {
        channels.extend(ChannelSpec::list(&sequence::REFERENCE_CHANNELS));
    }
    let mut manifest = Manifest::new(scene.width, scene.height, channels);
    manifest.render = Some(RenderInfo {
        seed: opts.seed,
        spp: opts.spp,
        ibl_secondary: opts.ibl_secondary,
        reference_spp: opts.reference.then_some(REFERENCE_SPP),
        fireflies: opts.fireflies.clone(),
    });
    let mut seq = FrameSequence::new(manifest);
    let params = RenderParams {
        ibl_secondary: opts.ibl_secondary,
        ..RenderParams::new(opts.spp, opts.seed)
    };
    for f in 0..scene.frame_count {
        let mut inputs = renderer.render(f, &params);
        if let Some(ff) = &opts.fireflies {
            inputs.specular.data = inject_fireflies(&inputs.specular.data, ff.rate, ff.magnitude, firefly_seed(opts.seed, f));
        }
        let mut set = sequence::inputs_to_channels(&inputs);
        if opts.reference {
            let r = renderer.reference(f, reference_seed(opts.seed), opts.ibl_secondary);
            set.insert(sequence::REFERENCE.into(), PfmImage::Rgb(r.composite));
            set.insert(sequence::REFERENCE_SHADOW.into(), PfmImage::Mono(r.shadow));
            set.insert(sequence::REFERENCE_SPECULAR.into(), PfmImage::Rgb(r.specular));
        }
        seq.push_frame(set);
    }
    seq.env = Some(renderer.env().clone());
    seq.manifest.scene = Some(scene);
    Ok(seq)
}

pub fn synth(opts: &SynthOptions, out: &Path) -> Result<FrameSequence> {
    let seq = synthesize(opts)?;
    sequence::save_sequence(&seq, out)?;
    Ok(seq)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Denoises the sequence in `input` and writes outputs plus `report.json`
/// under `out`.
pub fn denoise(
    input: &Path,
    config: &DenoiseConfig,
    preset: Option<&str>,
    out: &Path,
    dump_intermediates: bool,
) -> Result<PipelineReport> {
    let seq = sequence::load_sequence(input)?;
    let result = pipeline::run_pipeline(&seq, config, ChannelSelection::default(), dump_intermediates, preset)?;
    sequence::save_sequence(&result.sequence, out)?;
    write_json(&out.join(REPORT_FILE), &result.report)?;
    Ok(result.report)
}

fn pick_channel(seq: &FrameSequence, preferred: &[&str]) -> Option<String> {
    preferred
        .iter()
        .find(|n| seq.manifest.has_channel(n))
        .map(|n| n.to_string())
}

fn channel_image(seq: &FrameSequence, frame: usize, name: &str) -> Result<Image<glam::Vec3>> {
    Ok(match seq.channel(frame, name)? {
        PfmImage::Rgb(img) => img.clone(),
        PfmImage::Mono(img) => img.map(glam::Vec3::splat),
    })
}

/// Per-frame SSIM and MSE between `channel_a` of sequence `a` and
/// `channel_b` of sequence `b`. Defaults pick the denoised output of `a` and
/// the reference of `b`.
pub fn evaluate(a: &FrameSequence, b: &FrameSequence, channel_a: Option<&str>, channel_b: Option<&str>) -> Result<Vec<EvalRecord>> {
    let ca = match channel_a {
        Some(c) => c.to_owned(),
        None => pick_channel(a, &[sequence::FINAL, sequence::COMPOSITE, sequence::REFERENCE])
            .ok_or_else(|| Error::Domain("sequence A has no comparable channel".into()))?,
    };
    let cb = match channel_b {
        Some(c) => c.to_owned(),
        None => pick_channel(b, &[sequence::REFERENCE]).unwrap_or_else(|| ca.clone()),
    };
    if a.len() != b.len() {
        return Err(Error::Domain(format!("sequences have {} and {} frames", a.len(), b.len())));
    }
    let scene = a.manifest.scene.as_ref().or(b.manifest.scene.as_ref());
    let preset = a
        .manifest
        .denoise
        .as_ref()
        .and_then(|d| d.preset.clone())
        .unwrap_or_else(|| if a.manifest.denoise.is_some() { "custom".into() } else { "none".into() });
    let mut records = Vec::with_capacity(a.len());
    for f in 0..a.len() {
        let ia = channel_image(a, f, &ca)?;
        let ib = channel_image(b, f, &cb)?;
        records.push(EvalRecord {
            scene: scene.map_or_else(String::new, |s| s.name.clone()),
            preset: preset.clone(),
            roughness: scene.and_then(|s| s.tags.roughness),
            shadow_angle: scene.map_or(0.0, |s| s.shadow_angle),
            movement: scene.map_or_else(String::new, |s| s.movement().name().to_owned()),
            channel: ca.clone(),
            frame: f,
            ssim: metrics::ssim(&ia, &ib)?,
            mse: metrics::mse(&ia, &ib)?,
        });
    }
    Ok(records)
}

/// Writes records as CSV when `path` ends in `.csv`, JSON otherwise.
pub fn write_records(records: &[EvalRecord], path: &Path) -> Result<()> {
    let text = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        metrics::records_to_csv(records)?
    } else {
        metrics::records_to_json(records) + "\n"
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn eval(a: &Path, b: &Path, channel_a: Option<&str>, channel_b: Option<&str>, report: &Path) -> Result<Vec<EvalRecord>> {
    let sa = sequence::load_sequence(a)?;
    let sb = sequence::load_sequence(b)?;
    let records = evaluate(&sa, &sb, channel_a, channel_b)?;
    write_records(&records, report)?;
    Ok(records)
}

/// Timing of one stage (and spatial iteration), averaged per frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageBench {
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<u32>,
    pub stats: BenchStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: DenoiseConfig,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    /// Whole-sequence wall time.
    pub total: BenchStats,
    pub stages: Vec<StageBench>,
}

pub fn benchmark(seq: &FrameSequence, config: &DenoiseConfig, reps: usize) -> Result<BenchReport> {
    // fail on bad inputs before timing anything
    pipeline::run_pipeline(seq, config, ChannelSelection::default(), false, None)?;
    let mut samples: BTreeMap<(usize, Option<u32>), (Stage, Vec<f64>, u64)> = BTreeMap::new();
    let mut failure = None;
    let mut run = 0usize;
    let total = metrics::bench_pass(
        || {
            let result = match pipeline::run_pipeline(seq, config, ChannelSelection::default(), false, None) {
                Ok(r) => r,
                Err(e) => {
                    failure = Some(e);
                    return 0;
                }
            };
            run += 1;
            let frames = result.report.frames.len() as f64;
            let mut per_run: BTreeMap<(usize, Option<u32>), (Stage, f64, u64)> = BTreeMap::new();
            let mut taps = 0;
            for fr in &result.report.frames {
                for t in &fr.timings {
                    let e = per_run.entry((t.stage as usize, t.iteration)).or_insert((t.stage, 0.0, 0));
                    e.1 += t.ms / frames;
                    e.2 += t.taps;
                    taps += t.taps;
                }
            }
            // the first call is the discarded warm-up
            if run > 1 {
                for (k, (stage, ms, t)) in per_run {
                    let e = samples.entry(k).or_insert((stage, Vec::new(), 0));
                    e.1.push(ms);
                    e.2 = t;
                }
            }
            taps
        },
        reps,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let stages = samples
        .into_iter()
        .map(|((_, iteration), (stage, ms, taps))| StageBench {
            stage,
            iteration,
            stats: BenchStats::from_samples(&ms, taps),
        })
        .collect();
    Ok(BenchReport {
        config: config.clone(),
        frames: seq.len(),
        width: seq.manifest.width,
        height: seq.manifest.height,
        total,
        stages,
    })
}

pub fn bench(input: &Path, config: &DenoiseConfig, reps: usize, report: &Path) -> Result<BenchReport> {
    let seq = sequence::load_sequence(input)?;
    let r = benchmark(&seq, config, reps)?;
    write_json(report, &r)?;
    Ok(r)
}
