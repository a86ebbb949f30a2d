//! Latitude-longitude environment maps and their roughness prefiltering.

use std::f32::consts::PI;

use glam::Vec3;

use crate::image::Image;
use crate::par;

/// An HDR latitude-longitude map. Column `i` spans azimuth
/// `[2πi/W, 2π(i+1)/W)`, row `j` spans polar angle `[πj/H, π(j+1)/H)` measured
/// from `+Y`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvMap {
    pub image: Image<Vec3>,
}

pub fn texel_direction(i: usize, j: usize, width: usize, height: usize) -> Vec3 {
    let phi = 2.0 * PI * (i as f32 + 0.5) / width as f32;
    let theta = PI * (j as f32 + 0.5) / height as f32;
    direction_from_angles(theta, phi)
}

#[inline]
pub fn direction_from_angles(theta: f32, phi: f32) -> Vec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vec3::new(st * sp, ct, st * cp)
}

/// Solid angle of any texel in row `j`.
pub fn texel_solid_angle(j: usize, width: usize, height: usize) -> f32 {
    let t0 = PI * j as f32 / height as f32;
    let t1 = PI * (j + 1) as f32 / height as f32;
    2.0 * PI / width as f32 * (t0.cos() - t1.cos())
}

fn bilinear_latlong(img: &Image<Vec3>, dir: Vec3) -> Vec3 {
    let (w, h) = img.dims();
    let d = dir.normalize_or(Vec3::Y);
    let mut phi = d.x.atan2(d.z);
    if phi < 0.0 {
        phi += 2.0 * PI;
    }
    let theta = d.y.clamp(-1.0, 1.0).acos();
    let fx = phi / (2.0 * PI) * w as f32 - 0.5;
    let fy = theta / PI * h as f32 - 0.5;
    let x0 = fx.floor();
    let y0 = fy.floor();
    let tx = fx - x0;
    let ty = fy - y0;
    let wrap = |x: i64| x.rem_euclid(w as i64) as usize;
    let clamp = |y: i64| y.clamp(0, h as i64 - 1) as usize;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let a = img.get(wrap(x0), clamp(y0));
    let b = img.get(wrap(x0 + 1), clamp(y0));
    let c = img.get(wrap(x0), clamp(y0 + 1));
    let e = img.get(wrap(x0 + 1), clamp(y0 + 1));
    a.lerp(b, tx).lerp(c.lerp(e, tx), ty)
}

impl EnvMap {
    pub fn new(image: Image<Vec3>) -> Self {
        EnvMap { image }
    }

    /// Vertical sky gradient: `ground` below the horizon, blending to `zenith`.
    pub fn gradient(width: usize, height: usize, zenith: Vec3, horizon: Vec3, ground: Vec3) -> Self {
        EnvMap::new(Image::from_fn(width, height, |i, j| {
            let d = texel_direction(i, j, width, height);
            if d.y >= 0.0 {
                horizon.lerp(zenith, d.y.sqrt())
            } else {
                horizon.lerp(ground, (-d.y).sqrt())
            }
        }))
    }

    pub fn lookup(&self, dir: Vec3) -> Vec3 {
        bilinear_latlong(&self.image, dir)
    }

    /// Radiance integrated over the sphere, `Σ L·Ω`.
    pub fn energy(&self) -> Vec3 {
        energy(&self.image)
    }
}

fn energy(img: &Image<Vec3>) -> Vec3 {
    let (w, h) = img.dims();
    img.enumerate()
        .map(|(_, j, v)| v * texel_solid_angle(j, w, h))
        .sum()
}

/// Mip-like stack of the environment convolved for increasing roughness.
#[derive(Clone, Debug, PartialEq)]
pub struct PrefilteredEnvMap {
    levels: Vec<Image<Vec3>>,
}

/// Lobe roughness assigned to `level` of a `levels`-deep stack.
pub fn level_roughness(level: usize, levels: usize) -> f32 {
    if levels <= 1 {
        0.0
    } else {
        level as f32 / (levels - 1) as f32
    }
}

/// Cosine-power exponent for a roughness; infinite at zero roughness.
pub fn lobe_exponent(roughness: f32) -> f32 {
    if roughness <= 0.0 {
        f32::INFINITY
    } else {
        (2.0 / (roughness * roughness) - 2.0).max(1.0)
    }
}

/// Convolves `env` against a normalized cosine-power lobe per level by direct
/// summation over source texels weighted by solid angle. Level 0 is the source.
pub fn prefilter_env(env: &EnvMap, levels: usize) -> PrefilteredEnvMap {
    let levels = levels.max(1);
    let src = &env.image;
    let (w, h) = src.dims();
    let dirs: Vec<Vec3> = (0..h)
        .flat_map(|j| (0..w).map(move |i| texel_direction(i, j, w, h)))
        .collect();
    let weighted: Vec<(Vec3, f32, Vec3)> = src
        .enumerate()
        .map(|(i, j, v)| (dirs[j * w + i], texel_solid_angle(j, w, h), v))
        .collect();

    let mut out = vec![src.clone()];
    for k in 1..levels {
        let e = lobe_exponent(level_roughness(k, levels));
        let mut level = Image::new(w, h);
        par::for_each_row(level.data_mut(), w, |j, row| {
            for (i, px) in row.iter_mut().enumerate() {
                let d = dirs[j * w + i];
                let mut num = Vec3::ZERO;
                let mut den = 0.0f32;
                for &(s, omega, value) in &weighted {
                    let c = d.dot(s);
                    if c > 0.0 {
                        let wgt = c.powf(e) * omega;
                        num += value * wgt;
                        den += wgt;
                    }
                }
                *px = if den > 0.0 { num / den } else { Vec3::ZERO };
            }
        });
        out.push(level);
    }
    PrefilteredEnvMap { levels: out }
}

impl PrefilteredEnvMap {
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, k: usize) -> &Image<Vec3> {
        &self.levels[k]
    }

    pub fn level_energy(&self, k: usize) -> Vec3 {
        energy(&self.levels[k])
    }

    /// Radiance along `dir` for a surface of `roughness`, interpolating between
    /// the two nearest levels.
    pub fn sample(&self, dir: Vec3, roughness: f32) -> Vec3 {
        let n = self.levels.len();
        if n == 1 {
            return bilinear_latlong(&self.levels[0], dir);
        }
        let f = roughness.clamp(0.0, 1.0) * (n - 1) as f32;
        let lo = (f.floor() as usize).min(n - 1);
        let hi = (lo + 1).min(n - 1);
        let t = f - lo as f32;
        let a = bilinear_latlong(&self.levels[lo], dir);
        if t == 0.0 || lo == hi {
            return a;
        }
        a.lerp(bilinear_latlong(&self.levels[hi], dir), t)
    }
}
