//! Edge-avoiding à-trous wavelet filtering guided by the temporal variance.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use crate::config::DenoiseConfig;
use crate::error::{Error, Result};
use crate::frame::{ChannelKind, GBufferFrame, SurfaceAttrs};
use crate::image::{Image, Pixel};
use crate::par;

/// B3-spline taps.
pub const ATROUS_WEIGHTS: [f32; 5] = [1.0 / 16.0, 1.0 / 4.0, 3.0 / 8.0, 1.0 / 4.0, 1.0 / 16.0];

pub const DENSE_TAPS: u64 = 25;
pub const SEPARABLE_TAPS: u64 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AtrousKernel {
    pub level: u32,
}

impl AtrousKernel {
    pub fn new(level: u32) -> Self {
        AtrousKernel { level }
    }

    pub fn weights_1d(&self) -> [f32; 5] {
        ATROUS_WEIGHTS
    }

    /// Pixels between neighboring taps.
    pub fn step(&self) -> u32 {
        1 << self.level
    }

    /// Largest tap offset from the center, in pixels.
    pub fn radius(&self) -> u32 {
        2 * self.step()
    }

    pub fn weight_2d(&self, i: usize, j: usize) -> f32 {
        ATROUS_WEIGHTS[i] * ATROUS_WEIGHTS[j]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeParams {
    pub sigma_z: f32,
    pub sigma_n: f32,
    pub sigma_l: f32,
    pub epsilon: f32,
}

impl EdgeParams {
    pub fn from_config(cfg: &DenoiseConfig) -> Self {
        EdgeParams {
            sigma_z: cfg.sigma_z,
            sigma_n: cfg.sigma_n,
            sigma_l: cfg.sigma_l,
            epsilon: 1e-8,
        }
    }
}

impl Default for EdgeParams {
    fn default() -> Self {
        EdgeParams::from_config(&DenoiseConfig::default())
    }
}

/// Surface attributes plus the luminance being filtered.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeSample {
    pub attrs: SurfaceAttrs,
    pub luma: f32,
}

/// Joint depth, normal and luminance stopping weight. `distance` is the
/// screen-space distance in pixels between center and tap.
pub fn edge_weight(center: &EdgeSample, tap: &EdgeSample, center_variance: f32, distance: f32, params: &EdgeParams) -> f32 {
    if center.attrs.is_background() || tap.attrs.is_background() {
        return 0.0;
    }
    let dz = (center.attrs.depth - tap.attrs.depth).abs();
    let w_z = (-dz / (params.sigma_z * center.attrs.depth.abs() * distance + params.epsilon)).exp();
    let w_n = center.attrs.normal.dot(tap.attrs.normal).max(0.0).powf(params.sigma_n);
    let dl = (center.luma - tap.luma).abs();
    let w_l = (-dl / (params.sigma_l * center_variance.max(0.0).sqrt() + params.epsilon)).exp();
    w_z * w_n * w_l
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtrousOutput<P> {
    pub channel: Image<P>,
    pub variance: Image<f32>,
    /// Neighborhood visits made by this pass.
    pub taps: u64,
}

fn sample<P: Pixel>(img: &Image<P>, gbuf: &GBufferFrame, x: usize, y: usize) -> EdgeSample {
    EdgeSample {
        attrs: gbuf.attrs(x, y),
        luma: img.get(x, y).luma(),
    }
}

fn clamp_coord(v: isize, len: usize) -> usize {
    v.clamp(0, len as isize - 1) as usize
}

fn split<P: Pixel>(w: usize, h: usize, cells: Vec<(P, f32)>) -> (Image<P>, Image<f32>) {
    let (c, v): (Vec<P>, Vec<f32>) = cells.into_iter().unzip();
    (Image::from_vec(w, h, c), Image::from_vec(w, h, v))
}

/// One dense 5x5 iteration; `level_at` gives each pixel's level, `None`
/// leaves the pixel untouched.
fn dense_pass<P: Pixel>(
    channel: &Image<P>,
    variance: &Image<f32>,
    gbuf: &GBufferFrame,
    level_at: &(dyn Fn(usize, usize) -> Option<u32> + Sync),
    params: &EdgeParams,
) -> AtrousOutput<P> {
    let (w, h) = channel.dims();
    let taps = AtomicU64::new(0);
    let mut cells = vec![(P::default(), 0.0f32); w * h];
    par::for_each_row(&mut cells, w, |y, row| {
        let mut row_taps = 0;
        for (x, cell) in row.iter_mut().enumerate() {
            let level = match level_at(x, y) {
                Some(l) if gbuf.is_foreground(x, y) => l,
                _ => {
                    *cell = (channel.get(x, y), variance.get(x, y));
                    continue;
                }
            };
            let step = 1isize << level;
            let center = sample(channel, gbuf, x, y);
            let var_c = variance.get(x, y);
            let mut sum_w = 0.0f32;
            let mut sum_c = P::default();
            let mut sum_v = 0.0f32;
            for (j, kj) in ATROUS_WEIGHTS.iter().enumerate() {
                for (i, ki) in ATROUS_WEIGHTS.iter().enumerate() {
                    row_taps += 1;
                    let tx = clamp_coord(x as isize + (i as isize - 2) * step, w);
                    let ty = clamp_coord(y as isize + (j as isize - 2) * step, h);
                    let e = if i == 2 && j == 2 {
                        1.0
                    } else {
                        let dist = ((tx as f32 - x as f32).powi(2) + (ty as f32 - y as f32).powi(2)).sqrt();
                        edge_weight(&center, &sample(channel, gbuf, tx, ty), var_c, dist, params)
                    };
                    let wgt = ki * kj * e;
                    if wgt == 0.0 {
                        continue;
                    }
                    sum_w += wgt;
                    sum_c = sum_c + channel.get(tx, ty) * wgt;
                    sum_v += wgt * wgt * variance.get(tx, ty);
                }
            }
            *cell = (sum_c * (1.0 / sum_w), sum_v / (sum_w * sum_w));
        }
        taps.fetch_add(row_taps, Ordering::Relaxed);
    });
    let (channel, variance) = split(w, h, cells);
    AtrousOutput {
        channel,
        variance,
        taps: taps.into_inner(),
    }
}

/// One 5-tap pass along x (`vertical == false`) or y. Variance is only
/// updated by the vertical pass.
fn line_pass<P: Pixel>(
    channel: &Image<P>,
    variance: &Image<f32>,
    gbuf: &GBufferFrame,
    level_at: &(dyn Fn(usize, usize) -> Option<u32> + Sync),
    params: &EdgeParams,
    vertical: bool,
) -> AtrousOutput<P> {
    let (w, h) = channel.dims();
    let taps = AtomicU64::new(0);
    let mut cells = vec![(P::default(), 0.0f32); w * h];
    par::for_each_row(&mut cells, w, |y, row| {
        let mut row_taps = 0;
        for (x, cell) in row.iter_mut().enumerate() {
            let level = match level_at(x, y) {
                Some(l) if gbuf.is_foreground(x, y) => l,
                _ => {
                    *cell = (channel.get(x, y), variance.get(x, y));
                    continue;
                }
            };
            let step = 1isize << level;
            let center = sample(channel, gbuf, x, y);
            let var_c = variance.get(x, y);
            let mut sum_w = 0.0f32;
            let mut sum_c = P::default();
            let mut sum_v = 0.0f32;
            for (i, k) in ATROUS_WEIGHTS.iter().enumerate() {
                row_taps += 1;
                let off = (i as isize - 2) * step;
                let (tx, ty) = if vertical {
                    (x, clamp_coord(y as isize + off, h))
                } else {
                    (clamp_coord(x as isize + off, w), y)
                };
                let e = if i == 2 {
                    1.0
                } else {
                    let dist = (tx as f32 - x as f32).abs() + (ty as f32 - y as f32).abs();
                    edge_weight(&center, &sample(channel, gbuf, tx, ty), var_c, dist, params)
                };
                let wgt = k * e;
                if wgt == 0.0 {
                    continue;
                }
                sum_w += wgt;
                sum_c = sum_c + channel.get(tx, ty) * wgt;
                sum_v += wgt * wgt * variance.get(tx, ty);
            }
            let var = if vertical { sum_v / (sum_w * sum_w) } else { var_c };
            *cell = (sum_c * (1.0 / sum_w), var);
        }
        taps.fetch_add(row_taps, Ordering::Relaxed);
    });
    let (channel, variance) = split(w, h, cells);
    AtrousOutput {
        channel,
        variance,
        taps: taps.into_inner(),
    }
}

fn separable_pass<P: Pixel>(
    channel: &Image<P>,
    variance: &Image<f32>,
    gbuf: &GBufferFrame,
    level_at: &(dyn Fn(usize, usize) -> Option<u32> + Sync),
    params: &EdgeParams,
) -> AtrousOutput<P> {
    let horiz = line_pass(channel, variance, gbuf, level_at, params, false);
    let mut vert = line_pass(&horiz.channel, &horiz.variance, gbuf, level_at, params, true);
    vert.taps += horiz.taps;
    vert
}

/// One dense 5x5 à-trous iteration at `level` over every pixel.
pub fn atrous_dense<P: Pixel>(
    channel: &Image<P>,
    variance: &Image<f32>,
    gbuf: &GBufferFrame,
    level: u32,
    params: &EdgeParams,
) -> AtrousOutput<P> {
    dense_pass(channel, variance, gbuf, &|_, _| Some(level), params)
}

/// One horizontal-then-vertical 5+5 à-trous iteration at `level`.
pub fn atrous_separable<P: Pixel>(
    channel: &Image<P>,
    variance: &Image<f32>,
    gbuf: &GBufferFrame,
    level: u32,
    params: &EdgeParams,
) -> AtrousOutput<P> {
    separable_pass(channel, variance, gbuf, &|_, _| Some(level), params)
}

/// First à-trous level for a pixel: one level higher for rough surfaces and
/// wide shadow cones.
pub fn select_start_level(kind: ChannelKind, value: f32, config: &DenoiseConfig) -> u32 {
    if !config.adaptive_start {
        return 0;
    }
    let threshold = match kind {
        ChannelKind::IndirectSpecular => config.roughness_start_threshold,
        ChannelKind::Shadow => config.shadow_angle_start_threshold,
    };
    u32::from(value > threshold)
}

pub fn select_iteration_count(roughness: f32, ibl_adaptive: bool, default_iterations: u32) -> u32 {
    if !ibl_adaptive {
        default_iterations
    } else if roughness <= 0.0 {
        0
    } else if roughness <= 0.05 {
        1
    } else {
        4
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PassKind {
    Dense,
    Separable,
}

/// Instrumentation for one spatial iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct PassStats {
    pub iteration: u32,
    pub kind: PassKind,
    /// Distinct levels applied during this iteration, ascending.
    pub levels: Vec<u32>,
    pub taps: u64,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct SpatialOutput<P> {
    pub channel: Image<P>,
    pub variance: Image<f32>,
    /// Color to store in the temporal history for the next frame.
    pub feedback: Image<P>,
    pub passes: Vec<PassStats>,
    /// Output of every iteration, when requested.
    pub iterations: Vec<Image<P>>,
}

/// Runs the configured à-trous iterations for one channel.
///
/// Start level comes from `shadow_angle` for shadows and G-buffer roughness
/// for specular; the iteration count may vary per pixel when IBL-adaptive
/// iterations are on.
pub fn denoise_channel<P: Pixel>(
    channel: &Image<P>,
    variance: &Image<f32>,
    gbuf: &GBufferFrame,
    kind: ChannelKind,
    shadow_angle: &Image<f32>,
    config: &DenoiseConfig,
    keep_iterations: bool,
) -> Result<SpatialOutput<P>> {
    let (w, h) = channel.dims();
    if variance.dims() != (w, h) || gbuf.dims() != (w, h) || shadow_angle.dims() != (w, h) {
        return Err(Error::Domain("spatial filter inputs differ in size".into()));
    }
    let plan: Image<(u32, u32)> = Image::from_fn(w, h, |x, y| match kind {
        ChannelKind::Shadow => (
            select_start_level(kind, shadow_angle.get(x, y), config),
            config.iterations,
        ),
        ChannelKind::IndirectSpecular => {
            let r = gbuf.roughness.get(x, y);
            (
                select_start_level(kind, r, config),
                select_iteration_count(r, config.ibl_adaptive_iterations, config.iterations),
            )
        }
    });

    let mut rounds = 0;
    let mut top_level = None;
    for (x, y, (start, count)) in plan.enumerate() {
        if count > 0 && gbuf.is_foreground(x, y) {
            rounds = rounds.max(count);
            top_level = top_level.max(Some(start + count - 1));
        }
    }
    if let Some(level) = top_level {
        if level >= usize::BITS - 1 || (1usize << level) * 2 >= w.min(h) {
            return Err(Error::Config(format!(
                "à-trous level {level} is too wide for a {w}x{h} image"
            )));
        }
    }

    let params = EdgeParams::from_config(config);
    let mut current = channel.clone();
    let mut var = variance.clone();
    let mut feedback = None;
    let mut passes = Vec::new();
    let mut iterations = Vec::new();
    for i in 0..rounds {
        let level_at = |x: usize, y: usize| {
            let (start, count) = plan.get(x, y);
            (i < count).then_some(start + i)
        };
        let mut levels: Vec<u32> = plan
            .enumerate()
            .filter(|&(x, y, (_, count))| i < count && gbuf.is_foreground(x, y))
            .map(|(_, _, (start, _))| start + i)
            .collect();
        levels.sort_unstable();
        levels.dedup();

        let t0 = Instant::now();
        let out = if config.separable {
            separable_pass(&current, &var, gbuf, &level_at, &params)
        } else {
            dense_pass(&current, &var, gbuf, &level_at, &params)
        };
        passes.push(PassStats {
            iteration: i,
            kind: if config.separable { PassKind::Separable } else { PassKind::Dense },
            levels,
            taps: out.taps,
            elapsed: t0.elapsed(),
        });
        current = out.channel;
        var = out.variance;
        if i == 0 {
            feedback = Some(current.clone());
        }
        if keep_iterations {
            iterations.push(current.clone());
        }
    }
    let feedback = feedback.unwrap_or_else(|| current.clone());
    Ok(SpatialOutput {
        channel: current,
        variance: var,
        feedback,
        passes,
        iterations,
    })
}
