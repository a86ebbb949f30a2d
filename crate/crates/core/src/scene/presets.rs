//! Built-in synthetic scenes.
//!
//! `cubes-distance` has roughness-graded reflectors receding from the camera,
//! `shadow-objects` floats occluders over a ground plane, `pillars` casts long
//! parallel shadows, and `breakfast-lite` is a small interior with a table.

use glam::Vec3;

use super::{
    CameraRig, EnvSource, Ground, Keyframe, Light, Material, Movement, SceneDescriptor, SceneObject, SceneTags,
    Shape, Track,
};
use crate::error::{Error, Result};

pub const NAMES: [&str; 4] = ["cubes-distance", "shadow-objects", "pillars", "breakfast-lite"];

#[derive(Clone, Debug, PartialEq)]
pub struct PresetOptions {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    /// Overrides every material's roughness.
    pub roughness: Option<f32>,
    /// Overrides the preset's shadow angle (degrees).
    pub shadow_angle: Option<f32>,
    pub movement: Movement,
}

impl Default for PresetOptions {
    fn default() -> Self {
        PresetOptions {
            width: 64,
            height: 64,
            frames: 16,
            roughness: None,
            shadow_angle: None,
            movement: Movement::Static,
        }
    }
}

pub fn by_name(name: &str, opts: &PresetOptions) -> Result<SceneDescriptor> {
    match name {
        "cubes-distance" => Ok(cubes_distance(opts)),
        "shadow-objects" => Ok(shadow_objects(opts)),
        "pillars" => Ok(pillars(opts)),
        "breakfast-lite" => Ok(breakfast_lite(opts)),
        other => Err(Error::Scene(format!(
            "unknown preset `{other}` (expected one of {})",
            NAMES.join(", ")
        ))),
    }
}

fn sky() -> EnvSource {
    EnvSource::Gradient {
        width: 32,
        height: 16,
        zenith: Vec3::new(0.25, 0.4, 0.8),
        horizon: Vec3::new(0.85, 0.85, 0.9),
        ground: Vec3::new(0.2, 0.18, 0.16),
    }
}

fn cube(id: u32, center: Vec3, half: Vec3, albedo: Vec3, roughness: f32) -> SceneObject {
    SceneObject {
        id,
        shape: Shape::Box {
            min: center - half,
            max: center + half,
        },
        material: Material::new(albedo, roughness),
        motion: None,
    }
}

fn sphere(id: u32, center: Vec3, radius: f32, albedo: Vec3, roughness: f32) -> SceneObject {
    SceneObject {
        id,
        shape: Shape::Sphere { center, radius },
        material: Material::new(albedo, roughness),
        motion: None,
    }
}

fn linear(frames: usize, from: Vec3, to: Vec3) -> Track {
    Track::Keys(vec![
        Keyframe { frame: 0.0, value: from },
        Keyframe {
            frame: frames.saturating_sub(1).max(1) as f32,
            value: to,
        },
    ])
}

struct Layout {
    name: &'static str,
    camera_position: Vec3,
    camera_target: Vec3,
    vfov_deg: f32,
    objects: Vec<SceneObject>,
    ground: Ground,
    light_center: Vec3,
    intensity: Vec3,
    shadow_angle: f32,
    reference_point: Vec3,
    /// Per-sequence camera slide for moving-camera variants.
    camera_slide: Vec3,
    /// Per-sequence translation of the first object and the light.
    object_slide: Vec3,
    light_slide: Vec3,
}

fn finish(layout: Layout, opts: &PresetOptions) -> SceneDescriptor {
    let frames = opts.frames.max(1);
    let Layout {
        name,
        camera_position,
        camera_target,
        vfov_deg,
        mut objects,
        ground,
        light_center,
        intensity,
        shadow_angle,
        reference_point,
        camera_slide,
        object_slide,
        light_slide,
    } = layout;
    let mut camera = CameraRig {
        position: Track::Static(camera_position),
        target: Track::Static(camera_target),
        up: Vec3::Y,
        vfov_deg,
    };
    let mut light = Light {
        center: Track::Static(light_center),
        intensity,
    };
    match opts.movement {
        Movement::Static => {}
        Movement::MovingCamera => {
            camera.position = linear(frames, camera_position, camera_position + camera_slide);
            camera.target = linear(frames, camera_target, camera_target + camera_slide);
        }
        Movement::MovingObjectsAndLight => {
            objects[0].motion = Some(linear(frames, Vec3::ZERO, object_slide));
            light.center = linear(frames, light_center, light_center + light_slide);
        }
    }
    let scene = SceneDescriptor {
        name: name.to_owned(),
        width: opts.width,
        height: opts.height,
        frame_count: frames,
        camera,
        objects,
        ground: Some(ground),
        light,
        shadow_angle: opts.shadow_angle.unwrap_or(shadow_angle),
        reference_point,
        env: sky(),
        tags: SceneTags::default(),
    };
    match opts.roughness {
        Some(r) => scene.with_uniform_roughness(r),
        None => scene,
    }
}

pub fn cubes_distance(opts: &PresetOptions) -> SceneDescriptor {
    let half = Vec3::splat(0.5);
    let objects = vec![
        cube(2, Vec3::new(-1.8, 0.5, 1.2), half, Vec3::new(0.8, 0.15, 0.1), 0.0),
        cube(3, Vec3::new(-0.4, 0.5, -1.5), half, Vec3::new(0.15, 0.7, 0.2), 0.3),
        cube(4, Vec3::new(1.0, 0.5, -4.2), half, Vec3::new(0.1, 0.25, 0.8), 0.6),
        cube(5, Vec3::new(2.4, 0.5, -7.0), half, Vec3::new(0.85, 0.75, 0.2), 1.0),
        sphere(6, Vec3::new(0.9, 0.6, 1.6), 0.6, Vec3::new(0.9, 0.9, 0.9), 0.2),
    ];
    finish(
        Layout {
            name: "cubes-distance",
            camera_position: Vec3::new(0.0, 2.2, 6.5),
            camera_target: Vec3::new(0.0, 0.4, -2.0),
            vfov_deg: 45.0,
            objects,
            ground: Ground {
                id: 1,
                height: 0.0,
                material: Material::new(Vec3::splat(0.6), 0.1),
            },
            light_center: Vec3::new(3.0, 6.5, 3.5),
            intensity: Vec3::splat(140.0),
            shadow_angle: 4.0,
            reference_point: Vec3::ZERO,
            camera_slide: Vec3::new(1.2, 0.0, 0.0),
            object_slide: Vec3::new(1.5, 0.0, 0.0),
            light_slide: Vec3::new(-3.0, 0.0, 0.0),
        },
        opts,
    )
}

pub fn shadow_objects(opts: &PresetOptions) -> SceneDescriptor {
    let objects = vec![
        sphere(2, Vec3::new(-1.2, 1.3, 0.0), 0.7, Vec3::new(0.7, 0.3, 0.2), 0.4),
        cube(3, Vec3::new(1.1, 1.0, -0.6), Vec3::new(0.7, 0.08, 0.7), Vec3::new(0.3, 0.6, 0.7), 0.6),
        sphere(4, Vec3::new(0.9, 0.5, 1.6), 0.5, Vec3::new(0.8, 0.8, 0.3), 0.2),
    ];
    finish(
        Layout {
            name: "shadow-objects",
            camera_position: Vec3::new(0.0, 4.0, 6.5),
            camera_target: Vec3::new(0.0, 0.3, 0.0),
            vfov_deg: 45.0,
            objects,
            ground: Ground {
                id: 1,
                height: 0.0,
                material: Material::new(Vec3::splat(0.7), 0.5),
            },
            light_center: Vec3::new(0.5, 6.0, 1.0),
            intensity: Vec3::splat(110.0),
            shadow_angle: 10.0,
            reference_point: Vec3::ZERO,
            camera_slide: Vec3::new(1.0, 0.0, 0.0),
            object_slide: Vec3::new(1.2, 0.0, 0.4),
            light_slide: Vec3::new(2.0, 0.0, 0.0),
        },
        opts,
    )
}

pub fn pillars(opts: &PresetOptions) -> SceneDescriptor {
    let objects = (0..5)
        .map(|i| {
            let x = -3.0 + 1.5 * i as f32;
            cube(
                2 + i,
                Vec3::new(x, 1.5, -1.0),
                Vec3::new(0.25, 1.5, 0.25),
                Vec3::new(0.75, 0.7, 0.65),
                0.5,
            )
        })
        .collect();
    finish(
        Layout {
            name: "pillars",
            camera_position: Vec3::new(0.0, 3.5, 6.0),
            camera_target: Vec3::new(0.0, 0.8, -0.5),
            vfov_deg: 50.0,
            objects,
            ground: Ground {
                id: 1,
                height: 0.0,
                material: Material::new(Vec3::splat(0.65), 0.3),
            },
            light_center: Vec3::new(-5.0, 4.0, -3.0),
            intensity: Vec3::splat(160.0),
            shadow_angle: 6.0,
            reference_point: Vec3::new(0.0, 0.0, 1.0),
            camera_slide: Vec3::new(1.0, 0.0, 0.0),
            object_slide: Vec3::new(0.0, 0.0, 1.0),
            light_slide: Vec3::new(0.0, 0.0, 4.0),
        },
        opts,
    )
}

pub fn breakfast_lite(opts: &PresetOptions) -> SceneDescriptor {
    let wood = Vec3::new(0.55, 0.35, 0.2);
    let mut objects = vec![
        sphere(2, Vec3::new(-0.6, 1.45, -0.6), 0.35, Vec3::new(0.9, 0.9, 0.85), 0.1),
        sphere(3, Vec3::new(0.7, 1.3, -0.2), 0.2, Vec3::new(0.8, 0.2, 0.1), 0.3),
        cube(4, Vec3::new(0.0, 1.05, -0.5), Vec3::new(1.6, 0.05, 1.0), wood, 0.4),
        cube(5, Vec3::new(0.0, 2.0, -3.2), Vec3::new(5.0, 2.0, 0.2), Vec3::new(0.8, 0.78, 0.7), 0.9),
    ];
    for (i, (x, z)) in [(-1.45, -1.35), (1.45, -1.35), (-1.45, 0.35), (1.45, 0.35)].into_iter().enumerate() {
        objects.push(cube(6 + i as u32, Vec3::new(x, 0.5, z), Vec3::new(0.07, 0.5, 0.07), wood, 0.4));
    }
    finish(
        Layout {
            name: "breakfast-lite",
            camera_position: Vec3::new(0.0, 2.6, 4.0),
            camera_target: Vec3::new(0.0, 1.0, -1.0),
            vfov_deg: 50.0,
            objects,
            ground: Ground {
                id: 1,
                height: 0.0,
                material: Material::new(Vec3::new(0.5, 0.45, 0.4), 0.25),
            },
            light_center: Vec3::new(1.2, 3.8, 1.0),
            intensity: Vec3::splat(45.0),
            shadow_angle: 12.0,
            reference_point: Vec3::new(0.0, 1.1, -0.5),
            camera_slide: Vec3::new(0.8, 0.0, 0.0),
            object_slide: Vec3::new(0.6, 0.0, 0.0),
            light_slide: Vec3::new(-2.0, 0.0, 0.0),
        },
        opts,
    )
}
