use std::f64::consts::PI;

use glam::{DVec3, Vec3};
use rtdenoise::image::Image;
use rtdenoise::scene::{prefilter_env, texel_direction, EnvMap};

fn dir64(theta: f64, phi: f64) -> DVec3 {
    DVec3::new(theta.sin() * phi.sin(), theta.cos(), theta.sin() * phi.cos())
}

/// Cosine-weighted integral of a single bright texel, with the normalizing
/// integral taken by fine midpoint quadrature over the whole sphere.
fn cosine_oracle(d: DVec3, texel: (usize, usize), value: f64, w: usize, h: usize) -> f64 {
    let (i0, j0) = texel;
    let s = dir64(PI * (j0 as f64 + 0.5) / h as f64, 2.0 * PI * (i0 as f64 + 0.5) / w as f64);
    let omega = 2.0 * PI / w as f64 * ((PI * j0 as f64 / h as f64).cos() - (PI * (j0 + 1) as f64 / h as f64).cos());
    let (fw, fh) = (8 * w, 8 * h);
    let mut norm = 0.0;
    for j in 0..fh {
        let t0 = PI * j as f64 / fh as f64;
        let t1 = PI * (j + 1) as f64 / fh as f64;
        let dom = 2.0 * PI / fw as f64 * (t0.cos() - t1.cos());
        for i in 0..fw {
            let q = dir64(0.5 * (t0 + t1), 2.0 * PI * (i as f64 + 0.5) / fw as f64);
            norm += d.dot(q).max(0.0) * dom;
        }
    }
    value * d.dot(s).max(0.0) * omega / norm
}

#[test]
fn single_bright_texel_matches_cosine_quadrature() {
    let (w, h) = (32, 16);
    let texel = (5, 6);
    let mut img = Image::filled(w, h, Vec3::ZERO);
    img.set(texel.0, texel.1, Vec3::splat(100.0));
    let pre = prefilter_env(&EnvMap::new(img), 2);
    // the top level has roughness 1, a pure cosine lobe
    for (i, j) in [(5, 6), (8, 4), (1, 9), (12, 7)] {
        let got = pre.level(1).get(i, j).x as f64;
        let d = texel_direction(i, j, w, h).as_dvec3();
        let want = cosine_oracle(d, texel, 100.0, w, h);
        assert!(want > 0.0);
        assert!(
            (got - want).abs() <= 0.01 * want,
            "texel ({i},{j}): got {got}, oracle {want}"
        );
    }
    let behind = pre.level(1).get(21, 16 - 1 - 6).x;
    assert_eq!(behind, 0.0);
}
