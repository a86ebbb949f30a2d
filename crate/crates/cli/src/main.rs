use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rtdenoise::commands::{self, SynthOptions};
use rtdenoise::scene::presets::{self, PresetOptions};
use rtdenoise::scene::{Movement, SceneDescriptor};
use rtdenoise::sequence::FireflyInfo;
use rtdenoise::{par, DenoiseConfig, Preset};

#[derive(Parser)]
#[command(name = "rtdenoise", version, about = "Real-time ray-tracing denoiser reference pipeline")]
struct Cli {
    /// Worker threads for per-pixel passes (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render noisy inputs and references for a scene.
    Synth(SynthArgs),
    /// Denoise a synthesized sequence.
    Denoise(DenoiseArgs),
    /// Compare two sequences with SSIM and MSE.
    Eval(EvalArgs),
    /// Time every pipeline stage over a sequence.
    Bench(BenchArgs),
    /// Print a built-in scene as JSON.
    Scene(SceneArgs),
}

#[derive(Args)]
struct SceneSelect {
    /// Scene description file.
    #[arg(long, conflicts_with = "preset")]
    scene: Option<PathBuf>,
    /// Built-in scene name instead of a file.
    #[arg(long)]
    preset: Option<String>,
    /// Built-in scene width.
    #[arg(long, default_value_t = 64)]
    width: usize,
    /// Built-in scene height.
    #[arg(long, default_value_t = 64)]
    height: usize,
    /// Set every material's roughness.
    #[arg(long)]
    roughness: Option<f32>,
    /// Built-in scene shadow angle in degrees.
    #[arg(long)]
    shadow_angle: Option<f32>,
    /// Built-in scene animation: static, moving_camera, moving_objects_and_light.
    #[arg(long, default_value = "static")]
    movement: String,
}

impl SceneSelect {
    fn load(&self, frames: Option<usize>) -> Result<SceneDescriptor> {
        let scene = match (&self.scene, &self.preset) {
            (Some(path), _) => {
                SceneDescriptor::load(path).with_context(|| format!("loading scene {}", path.display()))?
            }
            (None, Some(name)) => {
                let opts = PresetOptions {
                    width: self.width,
                    height: self.height,
                    frames: frames.unwrap_or(16),
                    roughness: None,
                    shadow_angle: self.shadow_angle,
                    movement: self.movement.parse::<Movement>()?,
                };
                presets::by_name(name, &opts)?
            }
            (None, None) => bail!("one of --scene or --preset is required"),
        };
        Ok(match self.roughness {
            Some(r) => scene.with_uniform_roughness(r),
            None => scene,
        })
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    select: SceneSelect,
    /// Number of frames (default: the scene's animation length).
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long, default_value_t = 1)]
    spp: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shade secondary hits with the prefiltered environment.
    #[arg(long)]
    ibl_secondary: bool,
    /// Skip the converged reference renders.
    #[arg(long)]
    no_reference: bool,
    /// Fraction of specular pixels receiving a firefly.
    #[arg(long, requires = "firefly_magnitude")]
    firefly_rate: Option<f64>,
    /// Radiance added to each firefly pixel.
    #[arg(long, requires = "firefly_rate")]
    firefly_magnitude: Option<f32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// JSON config; absent fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Technique stack applied on top of the config.
    #[arg(long)]
    preset: Option<String>,
    /// Override a config field, e.g. `--set iterations=2`.
    #[arg(long = "set", value_name = "FIELD=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// Also write per-channel intermediate buffers.
    #[arg(long)]
    dump_intermediates: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Channel of A to compare (default: final output).
    #[arg(long)]
    channel_a: Option<String>,
    /// Channel of B to compare (default: reference).
    #[arg(long)]
    channel_b: Option<String>,
    /// Output file; `.csv` writes CSV, anything else JSON.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long = "set", value_name = "FIELD=VALUE")]
    overrides: Vec<String>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct SceneArgs {
    #[command(flatten)]
    select: SceneSelect,
    #[arg(long)]
    frames: Option<usize>,
}

fn load_config(path: Option<&PathBuf>, preset: Option<&str>, overrides: &[String]) -> Result<DenoiseConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            DenoiseConfig::from_json(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => DenoiseConfig::default(),
    };
    if let Some(name) = preset {
        cfg = name.parse::<Preset>()?.apply(&cfg);
    }
    Ok(cfg.with_overrides(overrides)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => {
            let scene = a.select.load(a.frames)?;
            let opts = SynthOptions {
                frames: a.frames,
                spp: a.spp,
                ibl_secondary: a.ibl_secondary,
                reference: !a.no_reference,
                fireflies: a
                    .firefly_rate
                    .zip(a.firefly_magnitude)
                    .map(|(rate, magnitude)| FireflyInfo { rate, magnitude }),
                ..SynthOptions::new(scene, a.seed)
            };
            let seq = commands::synth(&opts, &a.out)?;
            eprintln!("wrote {} frames to {}", seq.len(), a.out.display());
        }
        Command::Denoise(a) => {
            let cfg = load_config(a.config.as_ref(), a.preset.as_deref(), &a.overrides)?;
            let report = commands::denoise(&a.input, &cfg, a.preset.as_deref(), &a.out, a.dump_intermediates)?;
            if let Some(last) = report.frames.last().and_then(|f| f.ssim) {
                eprintln!("last frame SSIM vs reference: {last:.4}");
            }
            eprintln!("wrote {} frames to {}", report.frames.len(), a.out.display());
        }
        Command::Eval(a) => {
            let records = commands::eval(&a.a, &a.b, a.channel_a.as_deref(), a.channel_b.as_deref(), &a.report)?;
            let n = records.len().max(1) as f64;
            let ssim = records.iter().map(|r| r.ssim).sum::<f64>() / n;
            let mse = records.iter().map(|r| r.mse).sum::<f64>() / n;
            println!("frames {}  mean SSIM {ssim:.6}  mean MSE {mse:.6e}", records.len());
        }
        Command::Bench(a) => {
            let cfg = load_config(a.config.as_ref(), a.preset.as_deref(), &a.overrides)?;
            let r = commands::bench(&a.input, &cfg, a.reps, &a.report)?;
            println!(
                "{} frames {}x{}: min {:.3} ms  avg {:.3} ms  max {:.3} ms",
                r.frames, r.width, r.height, r.total.min_ms, r.total.avg_ms, r.total.max_ms
            );
        }
        Command::Scene(a) => {
            let mut scene = a.select.load(a.frames)?;
            if let Some(n) = a.frames {
                scene.frame_count = n;
            }
            println!("{}", serde_json::to_string_pretty(&scene)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(n) if n > 0 => par::with_threads(n, || run(cli)),
        _ => run(cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
