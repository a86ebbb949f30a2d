//! Image quality and timing measurements.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, Pixel};

pub const SSIM_WINDOW: usize = 8;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Exposure mapping applied before SSIM: `x / (1 + x)` clamped to `[0, 1]`.
pub fn ssim_exposure(x: f32) -> f64 {
    let x = x as f64;
    (x / (1.0 + x)).clamp(0.0, 1.0)
}

fn check_dims<A, B>(a: &Image<A>, b: &Image<B>) -> Result<()>
where
    A: Copy,
    B: Copy,
{
    if a.dims() != b.dims() {
        return Err(Error::Domain(format!(
            "image dimensions differ: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// Summed-area table with a zero first row and column.
struct Integral {
    w: usize,
    data: Vec<f64>,
}

impl Integral {
    fn new(w: usize, h: usize, f: impl Fn(usize) -> f64) -> Self {
        let stride = w + 1;
        let mut data = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += f(y * w + x);
                data[(y + 1) * stride + x + 1] = data[y * stride + x + 1] + row;
            }
        }
        Integral { w, data }
    }

    fn window(&self, x: usize, y: usize, ww: usize, wh: usize) -> f64 {
        let s = self.w + 1;
        let (x1, y1) = (x + ww, y + wh);
        self.data[y1 * s + x1] - self.data[y * s + x1] - self.data[y1 * s + x] + self.data[y * s + x]
    }
}

/// SSIM of one window from its raw sums.
pub fn ssim_from_stats(n: f64, sa: f64, sb: f64, saa: f64, sbb: f64, sab: f64) -> f64 {
    let ma = sa / n;
    let mb = sb / n;
    let va = saa / n - ma * ma;
    let vb = sbb / n - mb * mb;
    let cov = sab / n - ma * mb;
    ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2)) / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2))
}

/// Mean SSIM over all 8x8 windows of the exposure-mapped luminance. Images
/// smaller than a window are treated as one window.
pub fn ssim<P: Pixel>(a: &Image<P>, b: &Image<P>) -> Result<f64> {
    check_dims(a, b)?;
    let (w, h) = a.dims();
    if w == 0 || h == 0 {
        return Err(Error::Domain("empty image".into()));
    }
    let la: Vec<f64> = a.data().iter().map(|p| ssim_exposure(p.luma())).collect();
    let lb: Vec<f64> = b.data().iter().map(|p| ssim_exposure(p.luma())).collect();
    let ia = Integral::new(w, h, |i| la[i]);
    let ib = Integral::new(w, h, |i| lb[i]);
    let iaa = Integral::new(w, h, |i| la[i] * la[i]);
    let ibb = Integral::new(w, h, |i| lb[i] * lb[i]);
    let iab = Integral::new(w, h, |i| la[i] * lb[i]);
    let ww = SSIM_WINDOW.min(w);
    let wh = SSIM_WINDOW.min(h);
    let n = (ww * wh) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..=h - wh {
        for x in 0..=w - ww {
            total += ssim_from_stats(
                n,
                ia.window(x, y, ww, wh),
                ib.window(x, y, ww, wh),
                iaa.window(x, y, ww, wh),
                ibb.window(x, y, ww, wh),
                iab.window(x, y, ww, wh),
            );
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Mean squared difference over every pixel and component.
pub fn mse<P: Pixel>(a: &Image<P>, b: &Image<P>) -> Result<f64> {
    check_dims(a, b)?;
    let mut sum = 0.0f64;
    for (&pa, &pb) in a.data().iter().zip(b.data()) {
        for i in 0..P::CHANNELS {
            let d = (pa.component(i) - pb.component(i)) as f64;
            sum += d * d;
        }
    }
    let n = (a.len() * P::CHANNELS).max(1);
    Ok(sum / n as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchStats {
    pub reps: usize,
    pub min_ms: f64,
    pub avg_ms: f64,
    pub max_ms: f64,
    /// Taps reported by the last repetition.
    pub taps: u64,
}

impl BenchStats {
    pub fn from_samples(samples_ms: &[f64], taps: u64) -> Self {
        let min_ms = samples_ms.iter().copied().fold(f64::INFINITY, f64::min);
        let max_ms = samples_ms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let avg_ms = (samples_ms.iter().sum::<f64>() / samples_ms.len() as f64).clamp(min_ms, max_ms);
        BenchStats {
            reps: samples_ms.len(),
            min_ms,
            avg_ms,
            max_ms,
            taps,
        }
    }
}

/// Times `pass` over `reps` runs after one discarded warm-up run. The closure
/// returns its tap count.
pub fn bench_pass(mut pass: impl FnMut() -> u64, reps: usize) -> Result<BenchStats> {
    if reps < 3 {
        return Err(Error::Config(format!("bench needs at least 3 repetitions, got {reps}")));
    }
    pass();
    let mut samples = Vec::with_capacity(reps);
    let mut taps = 0;
    for _ in 0..reps {
        let t0 = Instant::now();
        taps = pass();
        samples.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    Ok(BenchStats::from_samples(&samples, taps))
}

/// One quality measurement, keyed by the axes the experiments vary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub scene: String,
    pub preset: String,
    pub roughness: Option<f32>,
    pub shadow_angle: f32,
    pub movement: String,
    pub channel: String,
    pub frame: usize,
    pub ssim: f64,
    pub mse: f64,
}

pub fn records_to_json(records: &[EvalRecord]) -> String {
    serde_json::to_string_pretty(records).expect("records serialize")
}

pub fn records_to_csv(records: &[EvalRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| Error::Domain(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Domain(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
