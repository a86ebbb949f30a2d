//! Ray intersection against spheres, axis-aligned boxes and the ground plane.

use glam::Vec3;

#[derive(Clone, Copy, Debug)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

impl Ray {
    pub fn new(origin: Vec3, dir: Vec3) -> Self {
        Ray { origin, dir }
    }

    #[inline]
    pub fn at(&self, t: f32) -> Vec3 {
        self.origin + self.dir * t
    }
}

/// Ray parameter and outward unit normal of the nearest hit in `(t_min, t_max)`.
pub fn intersect_sphere(ray: &Ray, center: Vec3, radius: f32, t_min: f32, t_max: f32) -> Option<(f32, Vec3)> {
    let oc = ray.origin - center;
    let a = ray.dir.length_squared();
    let half_b = oc.dot(ray.dir);
    let c = oc.length_squared() - radius * radius;
    let disc = half_b * half_b - a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let mut t = (-half_b - sq) / a;
    if t <= t_min || t >= t_max {
        t = (-half_b + sq) / a;
        if t <= t_min || t >= t_max {
            return None;
        }
    }
    let n = (ray.at(t) - center) / radius;
    Some((t, n.normalize()))
}

pub fn intersect_box(ray: &Ray, min: Vec3, max: Vec3, t_min: f32, t_max: f32) -> Option<(f32, Vec3)> {
    let inv = ray.dir.recip();
    let t0 = (min - ray.origin) * inv;
    let t1 = (max - ray.origin) * inv;
    let near = t0.min(t1);
    let far = t0.max(t1);
    let t_enter = near.max_element();
    let t_exit = far.min_element();
    if t_enter > t_exit || t_exit <= t_min || t_enter >= t_max {
        return None;
    }
    let (t, axis_vals) = if t_enter > t_min {
        (t_enter, near)
    } else {
        (t_exit, far)
    };
    if t >= t_max {
        return None;
    }
    let axis = if axis_vals.x == t {
        0
    } else if axis_vals.y == t {
        1
    } else {
        2
    };
    let mut n = Vec3::ZERO;
    n[axis] = if ray.dir[axis] > 0.0 { -1.0 } else { 1.0 };
    // exiting hit (origin inside the box): the face normal points outward
    if t != t_enter {
        n = -n;
    }
    Some((t, n))
}

/// Horizontal plane `y = height` with normal `+Y`, hit from either side.
pub fn intersect_ground(ray: &Ray, height: f32, t_min: f32, t_max: f32) -> Option<(f32, Vec3)> {
    if ray.dir.y.abs() < 1e-12 {
        return None;
    }
    let t = (height - ray.origin.y) / ray.dir.y;
    if t <= t_min || t >= t_max {
        return None;
    }
    Some((t, Vec3::Y))
}
