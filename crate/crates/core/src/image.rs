//! Dense 2D pixel buffers and the per-pixel value abstraction shared by every
//! pass.
//!
//! Row 0 is the top of the image. Shadow visibility is stored as `f32`, RGB
//! radiance as [`Vec3`].

use std::fmt::Debug;
use std::ops::{Add, Mul, Sub};

use glam::Vec3;

/// Rec.709 luminance weights.
pub const LUMA_WEIGHTS: Vec3 = Vec3::new(0.2126, 0.7152, 0.0722);

/// A per-pixel value that can be filtered: scalar shadow visibility or RGB.
pub trait Pixel:
    Copy
    + Default
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<f32, Output = Self>
    + 'static
{
    const CHANNELS: usize;

    /// Luminance used for variance estimation and edge stopping. For a scalar
    /// channel this is the value itself.
    fn luma(self) -> f32;

    fn component(self, i: usize) -> f32;

    fn from_fn(f: impl FnMut(usize) -> f32) -> Self;

    fn splat(v: f32) -> Self {
        Self::from_fn(|_| v)
    }

    fn map(self, mut f: impl FnMut(f32) -> f32) -> Self {
        Self::from_fn(|i| f(self.component(i)))
    }

    fn zip_map(self, other: Self, mut f: impl FnMut(f32, f32) -> f32) -> Self {
        Self::from_fn(|i| f(self.component(i), other.component(i)))
    }

    fn is_finite(self) -> bool {
        (0..Self::CHANNELS).all(|i| self.component(i).is_finite())
    }

    fn min_component(self) -> f32 {
        (0..Self::CHANNELS)
            .map(|i| self.component(i))
            .fold(f32::INFINITY, f32::min)
    }

    fn lerp(self, other: Self, t: f32) -> Self {
        self + (other - self) * t
    }
}

impl Pixel for f32 {
    const CHANNELS: usize = 1;

    #[inline]
    fn luma(self) -> f32 {
        self
    }

    #[inline]
    fn component(self, _i: usize) -> f32 {
        self
    }

    #[inline]
    fn from_fn(mut f: impl FnMut(usize) -> f32) -> Self {
        f(0)
    }
}

impl Pixel for Vec3 {
    const CHANNELS: usize = 3;

    #[inline]
    fn luma(self) -> f32 {
        self.dot(LUMA_WEIGHTS)
    }

    #[inline]
    fn component(self, i: usize) -> f32 {
        self[i]
    }

    #[inline]
    fn from_fn(mut f: impl FnMut(usize) -> f32) -> Self {
        Vec3::new(f(0), f(1), f(2))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Image<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Image {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "buffer size does not match dimensions");
        Image {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Image {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    /// Clamp-to-edge fetch.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> T {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(T) -> U) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().copied().map(f).collect(),
        }
    }

    pub fn same_dims<U>(&self, other: &Image<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Iterates `(x, y, value)` in row-major order.
    pub fn enumerate(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .map(move |(i, &v)| (i % w, i / w, v))
    }
}

impl<T: Copy + Default> Image<T> {
    pub fn new(width: usize, height: usize) -> Self {
        Image::filled(width, height, T::default())
    }
}

impl<P: Pixel> Image<P> {
    pub fn luma(&self) -> Image<f32> {
        self.map(Pixel::luma)
    }
}
