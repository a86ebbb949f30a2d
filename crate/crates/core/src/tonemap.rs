//! Reinhard range compression for the specular channel.

use glam::Vec3;

use crate::error::{Error, Result};
use crate::image::{Image, Pixel};

pub fn luma(c: Vec3) -> f32 {
    c.luma()
}

pub fn reinhard_forward(c: Vec3, luma_multiplier: f32) -> Vec3 {
    c / (1.0 + luma(c) * luma_multiplier)
}

/// `c * (1 + luma(c)) * weight`. Only approximately undoes
/// [`reinhard_forward`].
pub fn reinhard_inverse_approx(c: Vec3, weight: f32) -> Vec3 {
    c * (1.0 + luma(c)) * weight
}

pub fn reinhard_inverse_exact(c: Vec3, luma_multiplier: f32) -> Result<Vec3> {
    let d = 1.0 - luma(c) * luma_multiplier;
    if d <= 0.0 {
        return Err(Error::Domain(format!(
            "luma {} times multiplier {luma_multiplier} is not below 1",
            luma(c)
        )));
    }
    Ok(c / d)
}

pub fn forward_image(img: &Image<Vec3>, luma_multiplier: f32) -> Image<Vec3> {
    img.map(|c| reinhard_forward(c, luma_multiplier))
}

pub fn inverse_approx_image(img: &Image<Vec3>, weight: f32) -> Image<Vec3> {
    img.map(|c| reinhard_inverse_approx(c, weight))
}

pub fn inverse_exact_image(img: &Image<Vec3>, luma_multiplier: f32) -> Result<Image<Vec3>> {
    let data = img
        .data()
        .iter()
        .map(|&c| reinhard_inverse_exact(c, luma_multiplier))
        .collect::<Result<Vec<_>>>()?;
    Ok(Image::from_vec(img.width(), img.height(), data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn luma_read_off() {
        assert!((luma(Vec3::ONE) - 1.0).abs() < 1e-6);
        assert_eq!(luma(Vec3::ZERO), 0.0);
        assert_eq!(luma(Vec3::X), 0.2126);
    }

    #[test]
    fn forward_cases() {
        assert_eq!(reinhard_forward(Vec3::ZERO, 3.0), Vec3::ZERO);
        assert!((reinhard_forward(Vec3::ONE, 1.0) - Vec3::splat(0.5)).length() < 1e-6);
        let c = Vec3::new(4.0, 0.1, 2.0);
        assert_eq!(reinhard_forward(c, 0.0), c);
    }

    #[test]
    fn approx_inverse_cases() {
        assert_eq!(reinhard_inverse_approx(Vec3::ZERO, 1.0), Vec3::ZERO);
        assert!((reinhard_inverse_approx(Vec3::splat(0.5), 1.0) - Vec3::splat(0.75)).length() < 1e-6);
        assert_eq!(reinhard_inverse_approx(Vec3::ONE, 0.0), Vec3::ZERO);
    }

    #[test]
    fn exact_inverse_cases() {
        let c = Vec3::new(3.7, 0.2, 1.1);
        let back = reinhard_inverse_exact(reinhard_forward(c, 1.0), 1.0).unwrap();
        assert!((back - c).abs().max_element() < 1e-6);
        assert_eq!(reinhard_inverse_exact(Vec3::ZERO, 1.0).unwrap(), Vec3::ZERO);
        assert_eq!(reinhard_inverse_exact(c, 0.0).unwrap(), c);
        assert!(matches!(reinhard_inverse_exact(Vec3::ONE, 1.0), Err(Error::Domain(_))));
    }

    fn hdr() -> impl Strategy<Value = Vec3> {
        (0.0f32..50.0, 0.0f32..50.0, 0.0f32..50.0).prop_map(|(r, g, b)| Vec3::new(r, g, b))
    }

    proptest! {
        #[test]
        fn forward_luma_is_bounded(c in hdr(), m in 0.01f32..8.0) {
            prop_assert!(luma(reinhard_forward(c, m)) < 1.0 / m);
        }

        #[test]
        fn forward_preserves_luma_order(a in hdr(), b in hdr(), m in 0.0f32..4.0) {
            let (la, lb) = (luma(a), luma(b));
            let (fa, fb) = (luma(reinhard_forward(a, m)), luma(reinhard_forward(b, m)));
            if la < lb {
                prop_assert!(fa <= fb);
            }
        }

        #[test]
        fn forward_is_monotone_per_component(c in hdr(), i in 0usize..3, bump in 0.0f32..5.0, m in 0.0f32..4.0) {
            let mut d = c;
            d[i] += bump;
            prop_assert!(reinhard_forward(d, m)[i] >= reinhard_forward(c, m)[i] - 1e-6);
        }

        #[test]
        fn exact_round_trip(c in hdr(), m in 0.0f32..4.0) {
            let back = reinhard_inverse_exact(reinhard_forward(c, m), m).unwrap();
            let scale = 1.0 + c.max_element();
            prop_assert!((back - c).abs().max_element() <= 1e-5 * scale * scale);
        }
    }
}
