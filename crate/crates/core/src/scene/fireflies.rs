use crate::image::{Image, Pixel};
use crate::rng::hash_key;

/// Adds `magnitude` to every component of a deterministic pseudo-random subset
/// of pixels, each selected independently with probability `rate`.
pub fn inject_fireflies<P: Pixel>(channel: &Image<P>, rate: f64, magnitude: f32, seed: u64) -> Image<P> {
    let rate = rate.clamp(0.0, 1.0);
    let mut out = channel.clone();
    for (i, px) in out.data_mut().iter_mut().enumerate() {
        let u = (hash_key(&[seed, 0xF1F1, i as u64]) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        if u < rate {
            *px = *px + P::splat(magnitude);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use glam::Vec3;

    #[test]
    fn zero_rate_is_identity() {
        let img = Image::from_fn(16, 16, |x, y| (x * y) as f32 * 0.01);
        assert_eq!(inject_fireflies(&img, 0.0, 50.0, 1), img);
    }

    #[test]
    fn full_rate_adds_everywhere() {
        let img = Image::from_fn(8, 8, |x, _| Vec3::splat(x as f32));
        let out = inject_fireflies(&img, 1.0, 3.0, 1);
        for (a, b) in img.data().iter().zip(out.data()) {
            assert_eq!(*b, *a + Vec3::splat(3.0));
        }
    }

    #[test]
    fn affected_count_is_binomial() {
        let n = 512 * 512;
        let img = Image::filled(512, 512, 0.0f32);
        let out = inject_fireflies(&img, 0.01, 1.0, 99);
        let count = out.data().iter().filter(|&&v| v != 0.0).count() as f64;
        let mean = 0.01 * n as f64;
        let sigma = (n as f64 * 0.01 * 0.99).sqrt();
        assert!((count - mean).abs() <= 3.0 * sigma, "{count} vs {mean} ± {sigma}");
    }
}
