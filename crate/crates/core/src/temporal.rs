//! Backwards reprojection, exponential accumulation of color and luminance
//! moments, variance estimation and history rectification.

use glam::Vec2;

use crate::config::{DenoiseConfig, RectifyMode};
use crate::frame::{GBufferFrame, HistoryTexel, SurfaceAttrs, TemporalHistory};
use crate::image::{Image, Pixel};
use crate::par;

const DEPTH_EPSILON: f32 = 1e-6;
const MIN_TAP_WEIGHT: f32 = 1e-4;
const VARIANCE_RADIUS: isize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConsistencyParams {
    pub depth_threshold: f32,
    pub normal_threshold: f32,
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        ConsistencyParams {
            depth_threshold: 0.1,
            normal_threshold: 0.9,
        }
    }
}

/// Whether a previous-frame texel plausibly shows the same surface as the
/// current pixel. Background never matches.
pub fn consistency_test(prev: &SurfaceAttrs, curr: &SurfaceAttrs, params: &ConsistencyParams) -> bool {
    if curr.is_background() || prev.object_id != curr.object_id {
        return false;
    }
    let rel = (prev.depth - curr.depth).abs() / curr.depth.max(DEPTH_EPSILON);
    rel < params.depth_threshold && prev.normal.dot(curr.normal) > params.normal_threshold
}

/// Previous-frame texels under the reprojected position of `(x, y)` that pass
/// `accept`, with renormalized bilinear weights. Empty when nothing survives.
pub(crate) fn bilinear_taps(
    prev_gbuf: &GBufferFrame,
    curr_gbuf: &GBufferFrame,
    x: usize,
    y: usize,
    params: &ConsistencyParams,
    accept: impl Fn(usize, usize) -> bool,
) -> Vec<(usize, usize, f32)> {
    let (w, h) = curr_gbuf.dims();
    let motion: Vec2 = curr_gbuf.motion.get(x, y);
    let px = x as f32 + 0.5 + motion.x;
    let py = y as f32 + 0.5 + motion.y;
    if !(px >= 0.0 && py >= 0.0 && px <= w as f32 && py <= h as f32) {
        return Vec::new();
    }
    let fx = px - 0.5;
    let fy = py - 0.5;
    let x0 = fx.floor();
    let y0 = fy.floor();
    let tx = fx - x0;
    let ty = fy - y0;
    let (x0, y0) = (x0 as isize, y0 as isize);
    let curr = curr_gbuf.attrs(x, y);
    let mut taps = Vec::with_capacity(4);
    let mut total = 0.0;
    for (dx, dy, wgt) in [
        (0, 0, (1.0 - tx) * (1.0 - ty)),
        (1, 0, tx * (1.0 - ty)),
        (0, 1, (1.0 - tx) * ty),
        (1, 1, tx * ty),
    ] {
        let (sx, sy) = (x0 + dx, y0 + dy);
        if wgt <= 0.0 || sx < 0 || sy < 0 || sx >= w as isize || sy >= h as isize {
            continue;
        }
        let (sx, sy) = (sx as usize, sy as usize);
        if !accept(sx, sy) || !consistency_test(&prev_gbuf.attrs(sx, sy), &curr, params) {
            continue;
        }
        taps.push((sx, sy, wgt));
        total += wgt;
    }
    if total < MIN_TAP_WEIGHT {
        return Vec::new();
    }
    for t in &mut taps {
        t.2 /= total;
    }
    taps
}

/// History fetched for one pixel from the previous frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ReprojectionTap<P> {
    pub valid: bool,
    pub color: P,
    pub moment1: f32,
    pub moment2: f32,
    pub history_len: u32,
}

pub fn reproject_tap<P: Pixel>(
    prev_history: &TemporalHistory<P>,
    prev_gbuf: &GBufferFrame,
    curr_gbuf: &GBufferFrame,
    x: usize,
    y: usize,
    params: &ConsistencyParams,
) -> ReprojectionTap<P> {
    let texels = &prev_history.texels;
    let taps = bilinear_taps(prev_gbuf, curr_gbuf, x, y, params, |sx, sy| texels.get(sx, sy).len > 0);
    if taps.is_empty() {
        return ReprojectionTap::default();
    }
    let mut tap = ReprojectionTap {
        valid: true,
        ..Default::default()
    };
    let mut len = 0.0f32;
    for (sx, sy, w) in taps {
        let t = texels.get(sx, sy);
        tap.color = tap.color + t.color * w;
        tap.moment1 += t.moment1 * w;
        tap.moment2 += t.moment2 * w;
        len += t.len as f32 * w;
    }
    tap.history_len = (len.floor() as u32).max(1);
    tap
}

/// Blends the current sample into the reprojected history.
pub fn accumulate<P: Pixel>(
    curr_value: P,
    curr_luma: f32,
    tap: &ReprojectionTap<P>,
    alpha: f32,
    moments_alpha: f32,
    history_cap: u32,
) -> HistoryTexel<P> {
    if !tap.valid {
        return HistoryTexel {
            color: curr_value,
            moment1: curr_luma,
            moment2: curr_luma * curr_luma,
            len: 1,
        };
    }
    let n = tap.history_len as f32;
    let a = alpha.max(1.0 / (n + 1.0));
    let am = moments_alpha.max(1.0 / (n + 1.0));
    HistoryTexel {
        color: tap.color.lerp(curr_value, a),
        moment1: tap.moment1 + (curr_luma - tap.moment1) * am,
        moment2: tap.moment2 + (curr_luma * curr_luma - tap.moment2) * am,
        len: (tap.history_len + 1).min(history_cap),
    }
}

/// Luminance variance for one pixel: temporal moments once enough history
/// exists, otherwise moments over a 7x7 window of current-frame luminance
/// restricted to geometrically consistent neighbors.
pub fn estimate_variance(
    texel: &HistoryTexel<f32>,
    curr_luma: &Image<f32>,
    gbuf: &GBufferFrame,
    x: usize,
    y: usize,
    min_history: u32,
    params: &ConsistencyParams,
) -> f32 {
    if texel.len >= min_history {
        return (texel.moment2 - texel.moment1 * texel.moment1).max(0.0);
    }
    spatial_variance(curr_luma, gbuf, x, y, params)
}

fn spatial_variance(curr_luma: &Image<f32>, gbuf: &GBufferFrame, x: usize, y: usize, params: &ConsistencyParams) -> f32 {
    let (w, h) = curr_luma.dims();
    let center = gbuf.attrs(x, y);
    let mut sum = 0.0f64;
    let mut sum2 = 0.0f64;
    let mut n = 0u32;
    for dy in -VARIANCE_RADIUS..=VARIANCE_RADIUS {
        for dx in -VARIANCE_RADIUS..=VARIANCE_RADIUS {
            let sx = x as isize + dx;
            let sy = y as isize + dy;
            if sx < 0 || sy < 0 || sx >= w as isize || sy >= h as isize {
                continue;
            }
            let (sx, sy) = (sx as usize, sy as usize);
            if !consistency_test(&gbuf.attrs(sx, sy), &center, params) {
                continue;
            }
            let l = curr_luma.get(sx, sy) as f64;
            sum += l;
            sum2 += l * l;
            n += 1;
        }
    }
    if n == 0 {
        return 0.0;
    }
    let m1 = sum / n as f64;
    let m2 = sum2 / n as f64;
    (m2 - m1 * m1).max(0.0) as f32
}

/// Componentwise `mean ± gamma * stddev` box of a neighborhood.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RectificationBox<P> {
    pub mean: P,
    pub stddev: P,
    pub gamma: f32,
}

impl<P: Pixel> RectificationBox<P> {
    /// Statistics over the in-bounds 3x3 neighborhood of `(x, y)`.
    pub fn from_neighborhood(values: &Image<P>, x: usize, y: usize, gamma: f32) -> Self {
        let (w, h) = values.dims();
        let mut sum = P::default();
        let mut n = 0.0f32;
        let rows = y.saturating_sub(1)..=(y + 1).min(h - 1);
        let cols = x.saturating_sub(1)..=(x + 1).min(w - 1);
        for sy in rows.clone() {
            for sx in cols.clone() {
                sum = sum + values.get(sx, sy);
                n += 1.0;
            }
        }
        let mean = sum * (1.0 / n);
        let mut sq = P::default();
        for sy in rows {
            for sx in cols.clone() {
                let d = values.get(sx, sy) - mean;
                sq = sq + d.zip_map(d, |a, b| a * b);
            }
        }
        let stddev = (sq * (1.0 / n)).map(f32::sqrt);
        RectificationBox { mean, stddev, gamma }
    }

    pub fn half_extent(&self) -> P {
        self.stddev * self.gamma
    }

    pub fn lower(&self) -> P {
        self.mean - self.half_extent()
    }

    pub fn upper(&self) -> P {
        self.mean + self.half_extent()
    }

    pub fn contains(&self, c: P, tolerance: f32) -> bool {
        let ext = self.half_extent();
        (0..P::CHANNELS).all(|i| (c.component(i) - self.mean.component(i)).abs() <= ext.component(i) + tolerance)
    }

    pub fn clamp(&self, c: P) -> P {
        let lo = self.lower();
        let hi = self.upper();
        P::from_fn(|i| c.component(i).clamp(lo.component(i), hi.component(i)))
    }

    /// Moves `c` along the segment toward the mean until it meets the box.
    pub fn clip(&self, c: P) -> P {
        let dev = c - self.mean;
        let ext = self.half_extent();
        let mut t = 1.0f32;
        for i in 0..P::CHANNELS {
            let d = dev.component(i).abs();
            if d > 0.0 {
                t = t.min(ext.component(i) / d);
            }
        }
        if t >= 1.0 {
            c
        } else {
            self.mean + dev * t
        }
    }
}

pub fn rectify_history<P: Pixel>(tap_color: P, bbox: &RectificationBox<P>, mode: RectifyMode) -> P {
    match mode {
        RectifyMode::Off => tap_color,
        RectifyMode::Clamp => bbox.clamp(tap_color),
        RectifyMode::Clip => bbox.clip(tap_color),
    }
}

/// Pulls the tap's moments halfway toward the rectified color's luminance.
/// Only applied when rectification actually moved the color.
pub fn rectify_moments<P: Pixel>(tap: &mut ReprojectionTap<P>, rectified: P) {
    let l = rectified.luma();
    tap.moment1 = 0.5 * tap.moment1 + 0.5 * l;
    tap.moment2 = 0.5 * tap.moment2 + 0.5 * l * l;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemporalParams {
    pub alpha: f32,
    pub moments_alpha: f32,
    pub gamma: f32,
    pub rectify: RectifyMode,
    pub consistency: ConsistencyParams,
    pub min_history: u32,
    pub history_cap: u32,
    /// Keep per-pixel rectification records in the output.
    pub record_rectification: bool,
}

impl TemporalParams {
    pub fn from_config(cfg: &DenoiseConfig) -> Self {
        TemporalParams {
            alpha: cfg.alpha,
            moments_alpha: cfg.moments_alpha,
            gamma: cfg.clamp_gamma,
            rectify: cfg.rectify_mode,
            consistency: ConsistencyParams {
                depth_threshold: cfg.depth_threshold,
                normal_threshold: cfg.normal_threshold,
            },
            min_history: cfg.spatial_variance_min_history,
            history_cap: cfg.history_cap,
            record_rectification: false,
        }
    }
}

/// What rectification did to one pixel's reprojected history.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RectificationRecord<P> {
    pub tap: P,
    pub rectified: P,
    pub bbox: RectificationBox<P>,
}

#[derive(Clone, Debug)]
pub struct TemporalOutput<P> {
    /// Accumulated state; `color` doubles as the filter input for this frame.
    pub history: TemporalHistory<P>,
    pub variance: Image<f32>,
    /// Present when [`TemporalParams::record_rectification`] is set; `None`
    /// entries had no valid tap or rectification was off.
    pub rectification: Option<Vec<Option<RectificationRecord<P>>>>,
}

impl<P: Pixel> TemporalOutput<P> {
    pub fn color(&self) -> Image<P> {
        self.history.color()
    }
}

/// One frame of temporal filtering for a channel. `prev` is the previous
/// frame's history (with feedback applied) and G-buffer.
pub fn temporal_pass<P: Pixel>(
    noisy: &Image<P>,
    gbuf: &GBufferFrame,
    prev: Option<(&TemporalHistory<P>, &GBufferFrame)>,
    params: &TemporalParams,
) -> TemporalOutput<P> {
    let (w, h) = noisy.dims();
    let prev = prev.filter(|(hist, g)| hist.dims() == (w, h) && g.dims() == (w, h));
    let mut cells: Vec<(HistoryTexel<P>, Option<RectificationRecord<P>>)> = vec![Default::default(); w * h];
    par::for_each_row(&mut cells, w, |y, row| {
        for (x, cell) in row.iter_mut().enumerate() {
            let value = noisy.get(x, y);
            if !gbuf.is_foreground(x, y) {
                *cell = (
                    HistoryTexel {
                        color: value,
                        ..Default::default()
                    },
                    None,
                );
                continue;
            }
            let mut tap = match prev {
                Some((hist, pg)) => reproject_tap(hist, pg, gbuf, x, y, &params.consistency),
                None => ReprojectionTap::default(),
            };
            let mut record = None;
            if tap.valid && params.rectify != RectifyMode::Off {
                let bbox = RectificationBox::from_neighborhood(noisy, x, y, params.gamma);
                let rectified = rectify_history(tap.color, &bbox, params.rectify);
                if rectified != tap.color {
                    rectify_moments(&mut tap, rectified);
                }
                if params.record_rectification {
                    record = Some(RectificationRecord {
                        tap: tap.color,
                        rectified,
                        bbox,
                    });
                }
                tap.color = rectified;
            }
            let texel = accumulate(value, value.luma(), &tap, params.alpha, params.moments_alpha, params.history_cap);
            *cell = (texel, record);
        }
    });

    let texels = Image::from_vec(w, h, cells.iter().map(|c| c.0).collect());
    let rectification = params
        .record_rectification
        .then(|| cells.into_iter().map(|c| c.1).collect());

    let curr_luma = noisy.luma();
    let mut variance = Image::new(w, h);
    par::for_each_row(variance.data_mut(), w, |y, row| {
        for (x, v) in row.iter_mut().enumerate() {
            if !gbuf.is_foreground(x, y) {
                continue;
            }
            let t = texels.get(x, y);
            let scalar = HistoryTexel {
                color: 0.0,
                moment1: t.moment1,
                moment2: t.moment2,
                len: t.len,
            };
            *v = estimate_variance(&scalar, &curr_luma, gbuf, x, y, params.min_history, &params.consistency);
        }
    });

    TemporalOutput {
        history: TemporalHistory { texels },
        variance,
        rectification,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use glam::{Vec2, Vec3};
    use proptest::prelude::*;

    fn flat_gbuf(w: usize, h: usize) -> GBufferFrame {
        let mut g = GBufferFrame::empty(w, h);
        g.depth = Image::filled(w, h, 4.0);
        g.normal = Image::filled(w, h, Vec3::Z);
        g.object_id = Image::filled(w, h, 1);
        g
    }

    fn const_history(w: usize, h: usize, c: f32) -> TemporalHistory<f32> {
        TemporalHistory {
            texels: Image::filled(
                w,
                h,
                HistoryTexel {
                    color: c,
                    moment1: c,
                    moment2: c * c,
                    len: 5,
                },
            ),
        }
    }

    fn attrs(depth: f32, id: u32) -> SurfaceAttrs {
        SurfaceAttrs {
            depth,
            normal: Vec3::Y,
            object_id: id,
        }
    }

    #[test]
    fn consistency_cases() {
        let p = ConsistencyParams::default();
        assert!(consistency_test(&attrs(10.0, 3), &attrs(10.0, 3), &p));
        assert!(!consistency_test(&attrs(10.0, 3), &attrs(10.0, 5), &p));
        // |10 - 11.5| / 11.5 = 13% and |11.5 - 10| / 10 = 15%
        assert!(!consistency_test(&attrs(10.0, 3), &attrs(11.5, 3), &p));
        assert!(!consistency_test(&attrs(11.5, 3), &attrs(10.0, 3), &p));
        let mut tilted = attrs(10.0, 3);
        tilted.normal = Vec3::new(0.0, 0.8, 0.6);
        assert!(!consistency_test(&tilted, &attrs(10.0, 3), &p));
        assert!(!consistency_test(&attrs(1.0, 0), &attrs(1.0, 0), &p));
    }

    #[test]
    fn zero_motion_identical_gbuffer() {
        let g = flat_gbuf(8, 8);
        let tap = reproject_tap(&const_history(8, 8, 0.3), &g, &g, 4, 4, &ConsistencyParams::default());
        assert!(tap.valid);
        assert_eq!(tap.color, 0.3);
        assert_eq!(tap.history_len, 5);
    }

    #[test]
    fn off_screen_motion_is_invalid() {
        let mut g = flat_gbuf(8, 8);
        g.motion.set(7, 2, Vec2::new(4.0, 0.0)); // lands 3 px past the right edge
        g.motion.set(0, 0, Vec2::new(0.0, -3.6));
        let hist = const_history(8, 8, 0.3);
        for (x, y) in [(7, 2), (0, 0)] {
            let tap = reproject_tap(&hist, &g, &g, x, y, &ConsistencyParams::default());
            assert!(!tap.valid);
            assert_eq!(tap, ReprojectionTap::default());
        }
    }

    #[test]
    fn half_pixel_motion_over_constant_history() {
        let mut g = flat_gbuf(8, 8);
        g.motion = Image::filled(8, 8, Vec2::new(0.5, 0.0));
        let tap = reproject_tap(&const_history(8, 8, 0.7), &g, &g, 3, 3, &ConsistencyParams::default());
        assert!(tap.valid);
        assert!((tap.color - 0.7).abs() < 1e-7);
    }

    #[test]
    fn failing_texels_are_renormalized_away() {
        let mut prev = flat_gbuf(8, 8);
        prev.object_id.set(4, 3, 9);
        let mut g = flat_gbuf(8, 8);
        g.motion = Image::filled(8, 8, Vec2::new(0.5, 0.0));
        let mut hist = const_history(8, 8, 1.0);
        hist.texels.set(4, 3, HistoryTexel { color: 100.0, moment1: 0.0, moment2: 0.0, len: 1 });
        let tap = reproject_tap(&hist, &prev, &g, 3, 3, &ConsistencyParams::default());
        assert!(tap.valid);
        assert_eq!(tap.color, 1.0);
    }

    #[test]
    fn accumulate_cases() {
        let invalid = ReprojectionTap::<f32>::default();
        let t = accumulate(0.7, 0.7, &invalid, 0.2, 0.2, 256);
        assert_eq!((t.color, t.moment1, t.len), (0.7, 0.7, 1));
        assert!((t.moment2 - 0.49).abs() < 1e-7);

        let tap = ReprojectionTap { valid: true, color: 0.4, moment1: 0.4, moment2: 0.16, history_len: 7 };
        let t = accumulate(0.4, 0.4, &tap, 0.2, 0.2, 256);
        assert_eq!(t.color, 0.4);
        assert_eq!(t.len, 8);

        let tap = ReprojectionTap { valid: true, color: 0.0, moment1: 0.0, moment2: 0.0, history_len: 100 };
        let t = accumulate(1.0, 1.0, &tap, 0.2, 0.2, 256);
        assert!((t.color - 0.2).abs() < 1e-7);

        // young history averages uniformly
        let tap = ReprojectionTap { valid: true, color: 0.0, moment1: 0.0, moment2: 0.0, history_len: 1 };
        assert!((accumulate(1.0, 1.0, &tap, 0.2, 0.2, 256).color - 0.5).abs() < 1e-7);
        let tap = ReprojectionTap { valid: true, color: 0.0, moment1: 0.0, moment2: 0.0, history_len: 300 };
        assert_eq!(accumulate(1.0, 1.0, &tap, 0.2, 0.2, 256).len, 256);
    }

    #[test]
    fn variance_from_moments() {
        let g = flat_gbuf(8, 8);
        let luma = Image::filled(8, 8, 0.0);
        let p = ConsistencyParams::default();
        let t = HistoryTexel { color: 0.0, moment1: 0.5, moment2: 0.3, len: 4 };
        assert!((estimate_variance(&t, &luma, &g, 2, 2, 4, &p) - 0.05).abs() < 1e-7);
        let t = HistoryTexel { color: 0.0, moment1: 0.5, moment2: 0.25, len: 9 };
        assert_eq!(estimate_variance(&t, &luma, &g, 2, 2, 4, &p), 0.0);
    }

    #[test]
    fn spatial_fallback_on_checkerboard() {
        let g = flat_gbuf(16, 16);
        let luma = Image::from_fn(16, 16, |x, y| ((x + y) % 2) as f32);
        // brute-force oracle: moments of the 49 window values
        let (cx, cy) = (8usize, 8usize);
        let vals: Vec<f64> = (cy - 3..=cy + 3)
            .flat_map(|y| (cx - 3..=cx + 3).map(move |x| ((x + y) % 2) as f64))
            .collect();
        let m1 = vals.iter().sum::<f64>() / 49.0;
        let m2 = vals.iter().map(|v| v * v).sum::<f64>() / 49.0;
        let expected = m2 - m1 * m1; // 600 / 2401
        assert!((expected - 600.0 / 2401.0).abs() < 1e-12);
        let t = HistoryTexel { color: 0.0, moment1: 0.0, moment2: 0.0, len: 1 };
        let v = estimate_variance(&t, &luma, &g, cx, cy, 4, &ConsistencyParams::default());
        assert!((v as f64 - expected).abs() < 1e-6, "{v}");
        assert!((v - 0.25).abs() < 1e-3);
    }

    #[test]
    fn rectification_cases() {
        let inside = RectificationBox { mean: Vec3::ZERO, stddev: Vec3::ONE, gamma: 1.0 };
        let c = Vec3::new(0.5, -0.2, 0.9);
        for mode in [RectifyMode::Clamp, RectifyMode::Clip] {
            assert_eq!(rectify_history(c, &inside, mode), c);
        }
        let outside = Vec3::new(2.0, 0.0, 0.0);
        assert_eq!(rectify_history(outside, &inside, RectifyMode::Clamp), Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(rectify_history(outside, &inside, RectifyMode::Clip), Vec3::new(1.0, 0.0, 0.0));

        // segment-box intersection oracle on a diagonal deviation: the segment
        // from the mean to (2, 4, 0) leaves the unit box at parameter 1/4
        let diag = Vec3::new(2.0, 4.0, 0.0);
        let clip = rectify_history(diag, &inside, RectifyMode::Clip);
        assert!((clip - Vec3::new(0.5, 1.0, 0.0)).length() < 1e-6);
        assert_eq!(rectify_history(diag, &inside, RectifyMode::Clamp), Vec3::new(1.0, 1.0, 0.0));
    }

    #[test]
    fn constant_neighborhood_collapses_box() {
        let img = Image::filled(5, 5, Vec3::splat(0.3));
        let bbox = RectificationBox::from_neighborhood(&img, 2, 2, 1.0);
        assert!(bbox.stddev.max_element() < 1e-6);
        let tap = Vec3::splat(0.3) + Vec3::new(0.2, -0.1, 0.4);
        for mode in [RectifyMode::Clamp, RectifyMode::Clip] {
            assert!((rectify_history(tap, &bbox, mode) - Vec3::splat(0.3)).length() < 1e-6);
        }
    }

    #[test]
    fn border_box_uses_in_bounds_subset() {
        let img = Image::from_fn(4, 4, |x, y| (x + 4 * y) as f32);
        let bbox = RectificationBox::from_neighborhood(&img, 0, 0, 1.0);
        // values 0, 1, 4, 5
        assert!((bbox.mean - 2.5).abs() < 1e-6);
        assert!((bbox.stddev - 2.0616).abs() < 1e-3);
    }

    #[test]
    fn occlusion_resets_history_length() {
        let prev_g = flat_gbuf(6, 6);
        let mut g = flat_gbuf(6, 6);
        g.object_id.set(2, 2, 4);
        let hist = const_history(6, 6, 0.5);
        let params = TemporalParams::from_config(&DenoiseConfig::default());
        let out = temporal_pass(&Image::filled(6, 6, 0.9f32), &g, Some((&hist, &prev_g)), &params);
        assert_eq!(out.history.texels.get(2, 2).len, 1);
        assert_eq!(out.history.texels.get(3, 3).len, 6);
    }

    fn arb_vec3(range: f32) -> impl Strategy<Value = Vec3> {
        (-range..range, -range..range, -range..range).prop_map(|(a, b, c)| Vec3::new(a, b, c))
    }

    proptest! {
        #[test]
        fn rectified_color_stays_in_box(
            vals in proptest::collection::vec(arb_vec3(5.0), 9),
            tap in arb_vec3(20.0),
            gamma in 0.1f32..3.0,
        ) {
            let img = Image::from_vec(3, 3, vals);
            let bbox = RectificationBox::from_neighborhood(&img, 1, 1, gamma);
            for mode in [RectifyMode::Clamp, RectifyMode::Clip] {
                let r = rectify_history(tap, &bbox, mode);
                prop_assert!(bbox.contains(r, 1e-5), "{mode:?}: {r} outside {bbox:?}");
            }
        }

        #[test]
        fn clip_preserves_direction(
            mean in arb_vec3(2.0),
            sd in (0.0f32..2.0, 0.0f32..2.0, 0.0f32..2.0),
            tap in arb_vec3(10.0),
        ) {
            let bbox = RectificationBox { mean, stddev: Vec3::new(sd.0, sd.1, sd.2), gamma: 1.0 };
            let r = bbox.clip(tap);
            let d_tap = tap - mean;
            let d_r = r - mean;
            // d_r = t * d_tap with t in [0, 1]
            let t = if d_tap.length() > 0.0 { d_r.dot(d_tap) / d_tap.length_squared() } else { 0.0 };
            prop_assert!((-1e-5..=1.0 + 1e-5).contains(&t));
            prop_assert!((d_r - d_tap * t).length() <= 1e-4 * (1.0 + d_tap.length()));
        }

        #[test]
        fn variance_never_negative(
            m1 in -2.0f32..2.0, extra in 0.0f32..1.0, len in 0u32..10,
            lumas in proptest::collection::vec(0.0f32..3.0, 64),
        ) {
            let g = flat_gbuf(8, 8);
            let luma = Image::from_vec(8, 8, lumas);
            let t = HistoryTexel { color: 0.0, moment1: m1, moment2: m1 * m1 + extra - 1e-6, len };
            let v = estimate_variance(&t, &luma, &g, 3, 4, 4, &ConsistencyParams::default());
            prop_assert!(v >= 0.0);
        }

        #[test]
        fn moments_stay_consistent(
            samples in proptest::collection::vec(0.0f32..4.0, 1..30),
            rect in 0.0f32..4.0,
        ) {
            let mut tap = ReprojectionTap::<f32>::default();
            for &s in &samples {
                let t = accumulate(s, s, &tap, 0.2, 0.2, 256);
                tap = ReprojectionTap { valid: true, color: t.color, moment1: t.moment1, moment2: t.moment2, history_len: t.len };
                prop_assert!(tap.moment2 >= tap.moment1 * tap.moment1 - 1e-5);
            }
            rectify_moments(&mut tap, rect);
            prop_assert!(tap.moment2 >= tap.moment1 * tap.moment1 - 1e-5);
        }
    }
}
