//! Direct lighting, channel composition, sky fill and the final temporal
//! antialiasing pass.

use std::f32::consts::PI;

use glam::Vec3;

use crate::frame::GBufferFrame;
use crate::image::Image;
use crate::par;
use crate::scene::{Camera, EnvMap, SceneDescriptor};
use crate::temporal::{bilinear_taps, ConsistencyParams, RectificationBox};

/// Blend factor of the current frame in the antialiasing pass.
pub const TAA_BLEND: f32 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointLight {
    pub center: Vec3,
    pub intensity: Vec3,
}

impl PointLight {
    pub fn of(scene: &SceneDescriptor, frame: usize) -> Self {
        PointLight {
            center: scene.light_center(frame),
            intensity: scene.light.intensity,
        }
    }
}

/// World-space point seen at pixel `(x, y)`, rebuilt from view depth.
pub fn world_position(camera: &Camera, x: usize, y: usize, depth: f32) -> Vec3 {
    let d = camera.ray_dir(x as f32 + 0.5, y as f32 + 0.5);
    camera.position + d * (depth / d.dot(camera.forward))
}

/// Unshadowed Lambertian response to the light center.
pub fn shade_direct(gbuf: &GBufferFrame, camera: &Camera, light: &PointLight) -> Image<Vec3> {
    let (w, h) = gbuf.dims();
    let mut out = Image::new(w, h);
    par::for_each_row(out.data_mut(), w, |y, row| {
        for (x, px) in row.iter_mut().enumerate() {
            if !gbuf.is_foreground(x, y) {
                continue;
            }
            let p = world_position(camera, x, y, gbuf.depth.get(x, y));
            *px = lambert(gbuf.albedo.get(x, y), gbuf.normal.get(x, y), p, light);
        }
    });
    out
}

pub fn lambert(albedo: Vec3, normal: Vec3, p: Vec3, light: &PointLight) -> Vec3 {
    let to_light = light.center - p;
    let dist2 = to_light.length_squared();
    if dist2 <= 0.0 {
        return Vec3::ZERO;
    }
    let cos = normal.dot(to_light / dist2.sqrt()).max(0.0);
    albedo / PI * light.intensity * cos / dist2
}

/// Environment radiance along each pixel's camera ray.
pub fn sky_image(scene: &SceneDescriptor, frame: usize, env: &EnvMap) -> Image<Vec3> {
    let cam = scene.camera(frame);
    let (w, h) = (scene.width, scene.height);
    let mut out = Image::new(w, h);
    par::for_each_row(out.data_mut(), w, |y, row| {
        for (x, px) in row.iter_mut().enumerate() {
            *px = env.lookup(cam.ray_dir(x as f32 + 0.5, y as f32 + 0.5));
        }
    });
    out
}

/// `emissive + direct * shadow + specular` on surfaces, `sky` elsewhere.
pub fn composite(
    direct: &Image<Vec3>,
    shadow: &Image<f32>,
    specular: &Image<Vec3>,
    gbuf: &GBufferFrame,
    sky: &Image<Vec3>,
) -> Image<Vec3> {
    let (w, h) = gbuf.dims();
    assert!(
        direct.dims() == (w, h) && shadow.dims() == (w, h) && specular.dims() == (w, h) && sky.dims() == (w, h),
        "composite inputs differ in size"
    );
    Image::from_fn(w, h, |x, y| {
        if gbuf.is_foreground(x, y) {
            gbuf.emissive.get(x, y) + direct.get(x, y) * shadow.get(x, y) + specular.get(x, y)
        } else {
            sky.get(x, y)
        }
    })
}

/// Reprojects the previous antialiased frame, clamps it to the current 3x3
/// neighborhood and blends in [`TAA_BLEND`] of the current frame.
pub fn taa(
    curr: &Image<Vec3>,
    gbuf: &GBufferFrame,
    prev: Option<(&Image<Vec3>, &GBufferFrame)>,
    params: &ConsistencyParams,
) -> Image<Vec3> {
    let Some((prev_rgb, prev_gbuf)) = prev.filter(|(p, g)| p.dims() == curr.dims() && g.dims() == curr.dims()) else {
        return curr.clone();
    };
    let (w, h) = curr.dims();
    let mut out = Image::new(w, h);
    par::for_each_row(out.data_mut(), w, |y, row| {
        for (x, px) in row.iter_mut().enumerate() {
            let c = curr.get(x, y);
            let hist = if gbuf.is_foreground(x, y) {
                let taps = bilinear_taps(prev_gbuf, gbuf, x, y, params, |_, _| true);
                if taps.is_empty() {
                    None
                } else {
                    Some(taps.iter().fold(Vec3::ZERO, |acc, &(sx, sy, wt)| acc + prev_rgb.get(sx, sy) * wt))
                }
            } else if gbuf.motion.get(x, y) == glam::Vec2::ZERO {
                Some(prev_rgb.get(x, y))
            } else {
                None
            };
            *px = match hist {
                Some(hist) => {
                    let bbox = RectificationBox::from_neighborhood(curr, x, y, 1.0);
                    bbox.clamp(hist).lerp(c, TAA_BLEND)
                }
                None => c,
            };
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::presets::{self, PresetOptions};
    use glam::Vec2;

    fn facing_setup() -> (GBufferFrame, Camera) {
        let cam = Camera {
            position: Vec3::ZERO,
            forward: Vec3::NEG_Z,
            right: Vec3::X,
            up: Vec3::Y,
            tan_half_fov: 0.5,
            aspect: 1.0,
            width: 1,
            height: 1,
        };
        let mut g = GBufferFrame::empty(1, 1);
        g.depth = Image::filled(1, 1, 2.0);
        g.normal = Image::filled(1, 1, Vec3::Z);
        g.object_id = Image::filled(1, 1, 1);
        g.albedo = Image::filled(1, 1, Vec3::splat(PI));
        (g, cam)
    }

    #[test]
    fn head_on_unit_distance() {
        let (g, cam) = facing_setup();
        let light = PointLight { center: Vec3::new(0.0, 0.0, -1.0), intensity: Vec3::ONE };
        let out = shade_direct(&g, &cam, &light);
        assert!((out.get(0, 0) - Vec3::ONE).abs().max_element() < 1e-5);
    }

    #[test]
    fn grazing_or_black_gives_zero() {
        let (mut g, cam) = facing_setup();
        let light = PointLight { center: Vec3::new(3.0, 0.0, -2.0), intensity: Vec3::ONE };
        assert!(shade_direct(&g, &cam, &light).get(0, 0).abs().max_element() < 1e-6);
        g.albedo = Image::new(1, 1);
        let light = PointLight { center: Vec3::new(0.0, 0.0, -1.0), intensity: Vec3::ONE };
        assert_eq!(shade_direct(&g, &cam, &light).get(0, 0), Vec3::ZERO);
    }

    #[test]
    fn composite_cases() {
        let (mut g, _) = facing_setup();
        g.emissive = Image::filled(1, 1, Vec3::new(0.1, 0.0, 0.0));
        let direct = Image::filled(1, 1, Vec3::splat(2.0));
        let spec = Image::filled(1, 1, Vec3::new(0.0, 0.5, 0.0));
        let sky = Image::filled(1, 1, Vec3::splat(9.0));
        let ones = Image::filled(1, 1, 1.0);
        let zeros = Image::filled(1, 1, 0.0);
        let black = Image::new(1, 1);
        assert_eq!(composite(&direct, &ones, &black, &g, &sky).get(0, 0), Vec3::new(2.1, 2.0, 2.0));
        assert_eq!(composite(&direct, &zeros, &spec, &g, &sky).get(0, 0), Vec3::new(0.1, 0.5, 0.0));
        g.object_id = Image::new(1, 1);
        assert_eq!(composite(&direct, &ones, &spec, &g, &sky).get(0, 0), Vec3::splat(9.0));
    }

    #[test]
    fn composite_is_linear_in_channels() {
        let (g, _) = facing_setup();
        let d = Image::filled(1, 1, Vec3::new(0.3, 0.6, 0.9));
        let sky = Image::new(1, 1);
        let s = |v: f32| Image::filled(1, 1, v);
        let sp = |v: f32| Image::filled(1, 1, Vec3::splat(v));
        let f = |a: f32, b: f32| composite(&d, &s(a), &sp(b), &g, &sky).get(0, 0);
        let lhs = f(0.2 + 0.5, 0.1 + 0.4);
        let rhs = f(0.2, 0.1) + f(0.5, 0.4) - f(0.0, 0.0);
        assert!((lhs - rhs).abs().max_element() < 1e-6);
    }

    #[test]
    fn world_position_matches_scene_hits() {
        let scene = presets::by_name("cubes-distance", &PresetOptions::default()).unwrap();
        let cam = scene.camera(0);
        let p = Vec3::new(0.3, 0.2, 0.1);
        let (px, py) = cam.project(p).unwrap();
        let x = (px - 0.5).round() as usize;
        let y = (py - 0.5).round() as usize;
        let d = cam.ray_dir(x as f32 + 0.5, y as f32 + 0.5);
        let q = cam.position + d * 3.0;
        let back = world_position(&cam, x, y, cam.depth(q));
        assert!((back - q).length() < 1e-4);
    }

    #[test]
    fn all_background_is_sky() {
        let scene = presets::by_name("pillars", &PresetOptions::default()).unwrap();
        let env = scene.load_env().unwrap();
        let g = GBufferFrame::empty(scene.width, scene.height);
        let sky = sky_image(&scene, 0, &env);
        let black = Image::new(scene.width, scene.height);
        let out = composite(&black, &Image::new(scene.width, scene.height), &black, &g, &sky);
        assert_eq!(out, sky);
    }

    fn flat(w: usize, h: usize) -> GBufferFrame {
        let mut g = GBufferFrame::empty(w, h);
        g.depth = Image::filled(w, h, 2.0);
        g.normal = Image::filled(w, h, Vec3::Z);
        g.object_id = Image::filled(w, h, 1);
        g
    }

    #[test]
    fn taa_fixed_point_and_first_frame() {
        let g = flat(6, 6);
        let c = Image::filled(6, 6, Vec3::new(0.2, 0.4, 0.6));
        assert_eq!(taa(&c, &g, None, &ConsistencyParams::default()), c);
        let mut prev = c.clone();
        for _ in 0..10 {
            prev = taa(&c, &g, Some((&prev, &g)), &ConsistencyParams::default());
            assert!((0..36).all(|i| (prev.data()[i] - c.data()[i]).abs().max_element() < 1e-6));
        }
    }

    #[test]
    fn taa_damps_alternating_noise() {
        let g = flat(5, 5);
        let base = Vec3::splat(0.5);
        let d = 0.2;
        let frame = |k: usize| {
            let mut img = Image::filled(5, 5, base);
            let s = if k % 2 == 0 { d } else { -d };
            img.set(2, 2, base + Vec3::splat(s));
            img
        };
        let mut prev = frame(0);
        prev = taa(&prev, &g, None, &ConsistencyParams::default());
        let mut amp = 0.0f32;
        for k in 1..200 {
            prev = taa(&frame(k), &g, Some((&prev, &g)), &ConsistencyParams::default());
            if k > 150 {
                amp = amp.max((prev.get(2, 2).x - base.x).abs());
            }
        }
        assert!(amp < d, "steady-state amplitude {amp}");
    }

    #[test]
    fn taa_bounded_by_extended_box() {
        let g = flat(4, 4);
        let curr = Image::from_fn(4, 4, |x, y| Vec3::splat((x * y) as f32 * 0.1));
        let prev = Image::filled(4, 4, Vec3::splat(10.0));
        let out = taa(&curr, &g, Some((&prev, &g)), &ConsistencyParams::default());
        for (x, y, v) in out.enumerate() {
            let bbox = RectificationBox::from_neighborhood(&curr, x, y, 1.0);
            let lo = bbox.lower().min(curr.get(x, y));
            let hi = bbox.upper().max(curr.get(x, y));
            assert!(v.cmpge(lo - 1e-5).all() && v.cmple(hi + 1e-5).all());
        }
        let mut moving = g.clone();
        moving.motion = Image::filled(4, 4, Vec2::new(40.0, 0.0));
        assert_eq!(taa(&curr, &moving, Some((&prev, &g)), &ConsistencyParams::default()), curr);
    }
}
