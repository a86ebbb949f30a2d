use std::f32::consts::PI;

use glam::{DVec3, Vec2, Vec3};

use super::env::{prefilter_env, EnvMap, PrefilteredEnvMap};
use super::geometry::{intersect_box, intersect_ground, intersect_sphere, Ray};
use super::{lobe_exponent, Material, SceneDescriptor, Shape};
use crate::compose;
use crate::error::{Error, Result};
use crate::frame::{ChannelKind, FrameInputs, GBufferFrame, NoisyChannel, BACKGROUND_ID};
use crate::image::Image;
use crate::par;
use crate::rng::SampleRng;

/// Samples per pixel of the ground-truth estimator.
pub const REFERENCE_SPP: u32 = 1024;

const PREFILTER_LEVELS: usize = 6;
const RAY_EPSILON: f32 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderParams {
    pub spp: u32,
    pub seed: u64,
    /// Index of the first sample stream; sample `s` of a pixel always draws
    /// from stream `first_sample + s`.
    pub first_sample: u32,
    /// Shade secondary hits from the prefiltered environment instead of
    /// leaving their indirect term empty.
    pub ibl_secondary: bool,
}

impl RenderParams {
    pub fn new(spp: u32, seed: u64) -> Self {
        RenderParams {
            spp,
            seed,
            first_sample: 0,
            ibl_secondary: false,
        }
    }
}

/// Converged channels for one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub shadow: Image<f32>,
    pub specular: Image<Vec3>,
    pub composite: Image<Vec3>,
}

#[derive(Clone, Copy, Debug)]
struct Hit {
    point: Vec3,
    normal: Vec3,
    id: u32,
    material: Material,
    offset: Vec3,
}

#[derive(Clone, Copy, Debug, Default)]
struct PixelOut {
    depth: f32,
    normal: Vec3,
    motion: Vec2,
    id: u32,
    albedo: Vec3,
    roughness: f32,
    emissive: Vec3,
    shadow: f32,
    specular: Vec3,
}

/// Scene plus its environment, prefiltered once up front.
pub struct Renderer<'a> {
    scene: &'a SceneDescriptor,
    env: EnvMap,
    prefiltered: PrefilteredEnvMap,
}

impl<'a> Renderer<'a> {
    pub fn new(scene: &'a SceneDescriptor) -> Result<Self> {
        scene.validate()?;
        let env = scene.load_env()?;
        Ok(Self::with_env(scene, env))
    }

    pub fn with_env(scene: &'a SceneDescriptor, env: EnvMap) -> Self {
        let prefiltered = prefilter_env(&env, PREFILTER_LEVELS);
        Renderer {
            scene,
            env,
            prefiltered,
        }
    }

    pub fn scene(&self) -> &SceneDescriptor {
        self.scene
    }

    pub fn env(&self) -> &EnvMap {
        &self.env
    }

    pub fn prefiltered(&self) -> &PrefilteredEnvMap {
        &self.prefiltered
    }

    fn trace(&self, ray: &Ray, frame: usize, t_max: f32) -> Option<Hit> {
        let mut best: Option<(f32, Vec3, u32, Material, Vec3)> = None;
        let mut t_far = t_max;
        for o in &self.scene.objects {
            let off = o.offset(frame);
            let hit = match o.shape {
                Shape::Sphere { center, radius } => intersect_sphere(ray, center + off, radius, RAY_EPSILON, t_far),
                Shape::Box { min, max } => intersect_box(ray, min + off, max + off, RAY_EPSILON, t_far),
            };
            if let Some((t, n)) = hit {
                t_far = t;
                best = Some((t, n, o.id, o.material, off));
            }
        }
        if let Some(g) = &self.scene.ground {
            if let Some((t, n)) = intersect_ground(ray, g.height, RAY_EPSILON, t_far) {
                best = Some((t, n, g.id, g.material, Vec3::ZERO));
            }
        }
        best.map(|(t, normal, id, material, offset)| {
            // shade the side facing the ray
            let normal = if normal.dot(ray.dir) > 0.0 { -normal } else { normal };
            Hit {
                point: ray.at(t),
                normal,
                id,
                material,
                offset,
            }
        })
    }

    fn occluded(&self, from: Vec3, to: Vec3, frame: usize) -> bool {
        let d = to - from;
        let dist = d.length();
        if dist <= RAY_EPSILON {
            return false;
        }
        let ray = Ray::new(from, d / dist);
        self.trace(&ray, frame, dist - RAY_EPSILON).is_some()
    }

    fn object_offset(&self, id: u32, frame: usize) -> Vec3 {
        self.scene
            .objects
            .iter()
            .find(|o| o.id == id)
            .map_or(Vec3::ZERO, |o| o.offset(frame))
    }

    /// Radiance leaving a secondary hit toward `-incoming`; deterministic given
    /// the hit.
    fn shade_secondary(&self, hit: &Hit, incoming: Vec3, frame: usize, ibl: bool) -> Vec3 {
        let m = &hit.material;
        let origin = hit.point + hit.normal * RAY_EPSILON;
        let center = self.scene.light_center(frame);
        let to_light = center - hit.point;
        let dist2 = to_light.length_squared();
        let l = to_light / dist2.sqrt();
        let cos = hit.normal.dot(l).max(0.0);
        let mut radiance = m.emissive;
        if cos > 0.0 && !self.occluded(origin, center, frame) {
            radiance += m.albedo / PI * self.scene.light.intensity * cos / dist2;
        }
        if ibl {
            let mirror = incoming - 2.0 * incoming.dot(hit.normal) * hit.normal;
            radiance += m.albedo * self.prefiltered.sample(mirror, m.roughness);
        }
        radiance
    }

    fn shade_pixel(&self, x: usize, y: usize, frame: usize, params: &RenderParams) -> PixelOut {
        let scene = self.scene;
        let cam = scene.camera(frame);
        let px = x as f32 + 0.5;
        let py = y as f32 + 0.5;
        let ray = Ray::new(cam.position, cam.ray_dir(px, py));
        let Some(hit) = self.trace(&ray, frame, f32::INFINITY) else {
            return PixelOut {
                depth: f32::INFINITY,
                id: BACKGROUND_ID,
                ..Default::default()
            };
        };

        let motion = if frame == 0 {
            Vec2::ZERO
        } else {
            let prev_cam = scene.camera(frame - 1);
            let prev_offset = self.object_offset(hit.id, frame - 1);
            if prev_cam == cam && prev_offset == hit.offset {
                Vec2::ZERO
            } else {
                let p_prev = hit.point - hit.offset + prev_offset;
                match prev_cam.project(p_prev) {
                    Some((qx, qy)) => Vec2::new(qx - px, qy - py),
                    None => Vec2::new(-4.0 * scene.width as f32, 0.0),
                }
            }
        };

        let origin = hit.point + hit.normal * RAY_EPSILON;
        let light_center = scene.light_center(frame);
        let light_radius = scene.light_radius();
        let m = hit.material;
        let mirror = ray.dir - 2.0 * ray.dir.dot(hit.normal) * hit.normal;
        let exponent = lobe_exponent(m.roughness);

        let mut visible = 0u32;
        let mut specular = DVec3::ZERO;
        for s in 0..params.spp {
            let mut rng = SampleRng::for_sample(params.seed, frame, x, y, params.first_sample + s);
            let u1 = rng.next_f32();
            let u2 = rng.next_f32();
            let target = if light_radius > 0.0 {
                light_center + uniform_sphere(u1, u2) * light_radius
            } else {
                light_center
            };
            if !self.occluded(origin, target, frame) {
                visible += 1;
            }

            let u3 = rng.next_f32();
            let u4 = rng.next_f32();
            let dir = if exponent.is_infinite() {
                mirror
            } else {
                sample_phong_lobe(mirror, exponent, u3, u4)
            };
            if dir.dot(hit.normal) <= 0.0 {
                continue;
            }
            let sec_ray = Ray::new(origin, dir);
            let radiance = match self.trace(&sec_ray, frame, f32::INFINITY) {
                Some(sec) => self.shade_secondary(&sec, dir, frame, params.ibl_secondary),
                None => self.env.lookup(dir),
            };
            specular += (radiance * m.reflectance).as_dvec3();
        }
        let n = params.spp.max(1) as f64;
        PixelOut {
            depth: cam.depth(hit.point),
            normal: hit.normal,
            motion,
            id: hit.id,
            albedo: m.albedo,
            roughness: m.roughness,
            emissive: m.emissive,
            shadow: (visible as f64 / n) as f32,
            specular: (specular / n).as_vec3(),
        }
    }

    /// G-buffer from one center ray per pixel plus `spp`-sample shadow and
    /// glossy reflection estimates.
    pub fn render(&self, frame: usize, params: &RenderParams) -> FrameInputs {
        let (w, h) = (self.scene.width, self.scene.height);
        let mut pixels = vec![PixelOut::default(); w * h];
        par::for_each_row(&mut pixels, w, |y, row| {
            for (x, px) in row.iter_mut().enumerate() {
                *px = self.shade_pixel(x, y, frame, params);
            }
        });
        let img = |f: &dyn Fn(&PixelOut) -> f32| Image::from_vec(w, h, pixels.iter().map(f).collect());
        let img3 = |f: &dyn Fn(&PixelOut) -> Vec3| Image::from_vec(w, h, pixels.iter().map(f).collect());
        let gbuffer = GBufferFrame {
            depth: img(&|p| p.depth),
            normal: img3(&|p| p.normal),
            motion: Image::from_vec(w, h, pixels.iter().map(|p| p.motion).collect()),
            object_id: Image::from_vec(w, h, pixels.iter().map(|p| p.id).collect()),
            albedo: img3(&|p| p.albedo),
            roughness: img(&|p| p.roughness),
            emissive: img3(&|p| p.emissive),
        };
        FrameInputs {
            gbuffer,
            shadow: NoisyChannel {
                kind: ChannelKind::Shadow,
                data: img(&|p| p.shadow),
                spp: params.spp,
            },
            specular: NoisyChannel {
                kind: ChannelKind::IndirectSpecular,
                data: img3(&|p| p.specular),
                spp: params.spp,
            },
            shadow_angle: Image::filled(w, h, self.scene.shadow_angle),
        }
    }

    /// The same estimator at [`REFERENCE_SPP`], plus the composed image.
    pub fn reference(&self, frame: usize, seed: u64, ibl_secondary: bool) -> Reference {
        let params = RenderParams {
            spp: REFERENCE_SPP,
            seed,
            first_sample: 0,
            ibl_secondary,
        };
        let r = self.render(frame, &params);
        let direct = compose::shade_direct(&r.gbuffer, &self.scene.camera(frame), &compose::PointLight::of(self.scene, frame));
        let sky = compose::sky_image(self.scene, frame, &self.env);
        let composite = compose::composite(&direct, &r.shadow.data, &r.specular.data, &r.gbuffer, &sky);
        Reference {
            shadow: r.shadow.data,
            specular: r.specular.data,
            composite,
        }
    }

    /// Background radiance seen through each pixel.
    pub fn sky(&self, frame: usize) -> Image<Vec3> {
        compose::sky_image(self.scene, frame, &self.env)
    }
}

fn uniform_sphere(u1: f32, u2: f32) -> Vec3 {
    let z = 1.0 - 2.0 * u1;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let (s, c) = (2.0 * PI * u2).sin_cos();
    Vec3::new(r * c, r * s, z)
}

/// Direction from the normalized `cos^e` lobe around `axis`.
fn sample_phong_lobe(axis: Vec3, exponent: f32, u1: f32, u2: f32) -> Vec3 {
    let cos_t = u1.powf(1.0 / (exponent + 1.0));
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let (s, c) = (2.0 * PI * u2).sin_cos();
    let (t, b) = axis.any_orthonormal_pair();
    (axis * cos_t + (t * c + b * s) * sin_t).normalize()
}

/// Renders one frame; see [`Renderer::render`].
pub fn render_frame(
    scene: &SceneDescriptor,
    frame_index: usize,
    spp: u32,
    seed: u64,
    ibl_secondary: bool,
) -> Result<FrameInputs> {
    check_frame(scene, frame_index)?;
    let renderer = Renderer::new(scene)?;
    Ok(renderer.render(
        frame_index,
        &RenderParams {
            spp: spp.max(1),
            seed,
            first_sample: 0,
            ibl_secondary,
        },
    ))
}

pub fn render_reference(scene: &SceneDescriptor, frame_index: usize, seed: u64, ibl_secondary: bool) -> Result<Reference> {
    check_frame(scene, frame_index)?;
    Ok(Renderer::new(scene)?.reference(frame_index, seed, ibl_secondary))
}

fn check_frame(scene: &SceneDescriptor, frame: usize) -> Result<()> {
    if frame >= scene.frame_count {
        return Err(Error::Scene(format!(
            "frame {frame} beyond animation length {}",
            scene.frame_count
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::validate_frame;
    use crate::scene::presets::{self, PresetOptions};
    use crate::scene::{Keyframe, SceneObject, Track};

    fn small(opts: PresetOptions) -> PresetOptions {
        PresetOptions {
            width: 32,
            height: 24,
            ..opts
        }
    }

    #[test]
    fn lobe_samples_concentrate_around_axis() {
        let axis = Vec3::new(0.3, 0.8, 0.1).normalize();
        let mut rng = SampleRng::new(1);
        let mean_cos: f32 = (0..2000)
            .map(|_| sample_phong_lobe(axis, 30.0, rng.next_f32(), rng.next_f32()).dot(axis))
            .sum::<f32>()
            / 2000.0;
        // E[cos] for a cos^e lobe sampled this way is (e+1)/(e+2)
        assert!((mean_cos - 31.0 / 32.0).abs() < 0.005, "{mean_cos}");
    }

    #[test]
    fn frames_validate() {
        for name in presets::NAMES {
            let scene = presets::by_name(name, &small(PresetOptions::default())).unwrap();
            let r = Renderer::new(&scene).unwrap();
            for f in [0, 1] {
                let frame = r.render(f, &RenderParams::new(1, 3));
                let v = validate_frame(&frame);
                assert!(v.is_empty(), "{name}: {:?}", &v[..v.len().min(3)]);
                assert!(frame.gbuffer.object_id.data().iter().any(|&id| id != 0));
            }
        }
    }

    #[test]
    fn point_light_gives_binary_shadows() {
        let mut scene = presets::shadow_objects(&small(PresetOptions::default()));
        scene.shadow_angle = 0.0;
        let r = Renderer::new(&scene).unwrap();
        for spp in [1, 5] {
            let f = r.render(0, &RenderParams::new(spp, 9));
            assert!(f.shadow.data.data().iter().all(|&v| v == 0.0 || v == 1.0));
        }
        let one = r.render(0, &RenderParams::new(1, 9));
        let reference = r.reference(0, 9, false);
        assert_eq!(one.shadow.data, reference.shadow);
    }

    #[test]
    fn mirror_specular_ignores_seed() {
        let scene = presets::cubes_distance(&small(PresetOptions::default())).with_uniform_roughness(0.0);
        let r = Renderer::new(&scene).unwrap();
        let a = r.render(0, &RenderParams::new(1, 1));
        let b = r.render(0, &RenderParams::new(1, 1));
        let c = r.render(0, &RenderParams::new(1, 2));
        assert_eq!(a.specular.data, b.specular.data);
        assert_eq!(a.specular.data, c.specular.data);
        assert!(a.specular.data.data().iter().any(|v| v.max_element() > 0.0));
    }

    #[test]
    fn static_scene_has_zero_motion() {
        let scene = presets::pillars(&small(PresetOptions::default()));
        let f = render_frame(&scene, 3, 1, 0, false).unwrap();
        assert!(f.gbuffer.motion.data().iter().all(|m| *m == Vec2::ZERO));
    }

    #[test]
    fn umbra_pixel_is_black_at_every_spp() {
        // A receiver at the origin on the ground, a light above it, and a wide
        // slab in between. The slab blocks every point of the light sphere when
        // every ray from the receiver to the sphere's bounding cone crosses it.
        let mut scene = presets::shadow_objects(&small(PresetOptions::default()));
        let light = Vec3::new(0.0, 6.0, 0.0);
        scene.light.center = Track::Static(light);
        scene.reference_point = Vec3::ZERO;
        scene.shadow_angle = 8.0;
        scene.objects = vec![SceneObject {
            id: 7,
            shape: Shape::Box {
                min: Vec3::new(-1.5, 2.0, -1.5),
                max: Vec3::new(1.5, 2.2, 1.5),
            },
            material: Material::new(Vec3::splat(0.5), 1.0),
            motion: None,
        }];
        scene.camera.position = Track::Static(Vec3::new(0.0, 1.0, 5.0));
        scene.camera.target = Track::Static(Vec3::ZERO);

        // brute-force cone containment: the cone from the receiver subtending the
        // light sphere must pass through the slab's bottom face everywhere.
        let radius = scene.light_radius();
        let receiver = Vec3::new(0.0, RAY_EPSILON, 0.0);
        let half_angle = (radius / receiver.distance(light)).asin();
        let slab_y = 2.0;
        let mut rng = SampleRng::new(5);
        for _ in 0..10_000 {
            let d = sample_phong_lobe(Vec3::Y, 1.0, rng.next_f32(), rng.next_f32());
            if d.angle_between(Vec3::Y) > half_angle {
                continue;
            }
            let t = (slab_y - receiver.y) / d.y;
            let p = receiver + d * t;
            assert!(p.x.abs() < 1.5 && p.z.abs() < 1.5, "cone escapes slab");
        }

        let r = Renderer::new(&scene).unwrap();
        let cam = scene.camera(0);
        let (qx, qy) = cam.project(Vec3::ZERO).unwrap();
        let (x, y) = (qx as usize, qy as usize);
        for spp in [1, 16, 256] {
            let f = r.render(0, &RenderParams::new(spp, 11));
            assert_eq!(f.gbuffer.object_id.get(x, y), scene.ground.as_ref().unwrap().id);
            assert_eq!(f.shadow.data.get(x, y), 0.0, "spp {spp}");
        }
    }

    #[test]
    fn reference_is_mean_of_single_sample_renders() {
        let scene = presets::shadow_objects(&PresetOptions {
            width: 8,
            height: 8,
            ..PresetOptions::default()
        });
        let r = Renderer::new(&scene).unwrap();
        let reference = r.reference(0, 21, false);
        let mut shadow = vec![0.0f64; 64];
        let mut spec = vec![DVec3::ZERO; 64];
        for s in 0..REFERENCE_SPP {
            let f = r.render(
                0,
                &RenderParams {
                    spp: 1,
                    seed: 21,
                    first_sample: s,
                    ibl_secondary: false,
                },
            );
            for i in 0..64 {
                shadow[i] += f.shadow.data.data()[i] as f64;
                spec[i] += f.specular.data.data()[i].as_dvec3();
            }
        }
        for i in 0..64 {
            let ms = (shadow[i] / REFERENCE_SPP as f64) as f32;
            let mc = (spec[i] / REFERENCE_SPP as f64).as_vec3();
            assert!((ms - reference.shadow.data()[i]).abs() <= 1e-6);
            assert!((mc - reference.specular.data()[i]).abs().max_element() <= 1e-6);
        }
    }

    #[test]
    fn reference_shadow_standard_error_is_bounded() {
        let scene = presets::shadow_objects(&small(PresetOptions::default()));
        let r = Renderer::new(&scene).unwrap();
        let reference = r.reference(0, 4, false);
        for &p in reference.shadow.data() {
            let se = (p * (1.0 - p) / REFERENCE_SPP as f32).sqrt();
            assert!(se <= 0.5 / (REFERENCE_SPP as f32).sqrt() + 1e-7);
        }
    }

    #[test]
    fn single_sample_shadow_is_unbiased() {
        let scene = presets::shadow_objects(&small(PresetOptions::default()));
        let r = Renderer::new(&scene).unwrap();
        let reference = r.reference(0, 1000, false);
        // probe a penumbra pixel: the one whose reference is closest to 0.5
        let (probe, p) = reference
            .shadow
            .data()
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()))
            .map(|(i, &v)| (i, v))
            .unwrap();
        assert!(p > 0.05 && p < 0.95, "scene has no penumbra");
        let seeds = 256;
        let mean: f64 = (0..seeds)
            .map(|s| r.render(0, &RenderParams::new(1, s)).shadow.data.data()[probe] as f64)
            .sum::<f64>()
            / seeds as f64;
        let se = (p as f64 * (1.0 - p as f64) / seeds as f64).sqrt();
        assert!((mean - p as f64).abs() <= 4.0 * se, "mean {mean} ref {p} se {se}");
    }

    #[test]
    fn parallax_motion_reprojects_object_ids() {
        // flat wall facing the camera, camera slides sideways by about one pixel
        let mut scene = presets::shadow_objects(&PresetOptions {
            width: 64,
            height: 48,
            ..PresetOptions::default()
        });
        scene.ground = None;
        scene.objects = (0..4)
            .map(|i| SceneObject {
                id: 10 + i,
                shape: Shape::Box {
                    min: Vec3::new(-6.0 + 3.0 * i as f32, -4.0, -0.5),
                    max: Vec3::new(-3.0 + 3.0 * i as f32, 4.0, 0.0),
                },
                material: Material::new(Vec3::splat(0.5), 1.0),
                motion: None,
            })
            .collect();
        let cam0 = Vec3::new(0.0, 0.0, 6.0);
        // one pixel at the wall: 2 * d * tan(fov/2) / height
        let step = 2.0 * 6.0 * (scene.camera.vfov_deg.to_radians() * 0.5).tan() / 48.0;
        scene.camera.position = Track::Keys(vec![
            Keyframe { frame: 0.0, value: cam0 },
            Keyframe { frame: 1.0, value: cam0 + Vec3::X * step },
        ]);
        scene.camera.target = Track::Keys(vec![
            Keyframe { frame: 0.0, value: Vec3::ZERO },
            Keyframe { frame: 1.0, value: Vec3::X * step },
        ]);
        scene.frame_count = 2;
        let r = Renderer::new(&scene).unwrap();
        let f0 = r.render(0, &RenderParams::new(1, 0));
        let f1 = r.render(1, &RenderParams::new(1, 0));
        let (mut ok, mut total) = (0, 0);
        for y in 2..46 {
            for x in 2..62 {
                let m = f1.gbuffer.motion.get(x, y);
                // the camera slides +x, so content moves left and points back right
                assert!((m.x - 1.0).abs() < 0.05, "motion {m}");
                let qx = (x as f32 + 0.5 + m.x).floor() as usize;
                let qy = (y as f32 + 0.5 + m.y).floor() as usize;
                total += 1;
                if f0.gbuffer.object_id.get(qx, qy) == f1.gbuffer.object_id.get(x, y) {
                    ok += 1;
                }
            }
        }
        assert!(ok as f64 >= 0.99 * total as f64, "{ok}/{total}");
    }

    #[test]
    fn ibl_secondary_changes_shading_without_noise() {
        let scene = presets::cubes_distance(&small(PresetOptions::default())).with_uniform_roughness(0.0);
        let r = Renderer::new(&scene).unwrap();
        let mut p = RenderParams::new(1, 0);
        p.ibl_secondary = true;
        let a = r.render(0, &p);
        p.seed = 77;
        let b = r.render(0, &p);
        assert_eq!(a.specular.data, b.specular.data);
        let off = r.render(0, &RenderParams::new(1, 0));
        assert_ne!(a.specular.data, off.specular.data);
    }
}
