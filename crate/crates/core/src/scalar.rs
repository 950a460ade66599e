//! Floating-point scalar abstraction for embedding storage.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Element type of embedding rows.
///
/// Rows are stored and updated in `Self`; dot products and learning-rate
/// arithmetic are carried out in `f64` regardless.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + FromStr + Default + Send + Sync + 'static
{
    /// Encoded width in bytes, also used as the checkpoint type tag.
    const WIDTH: u8;

    fn as_f64(self) -> f64;
    fn from_f64_lossy(x: f64) -> Self;
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
    fn write_le(self, out: &mut Vec<u8>);
    /// `bytes` must be exactly `WIDTH` long.
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const WIDTH: u8 = 4;

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_f64_lossy(x: f64) -> Self {
        x as f32
    }
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4-byte scalar"))
    }
}

impl Scalar for f64 {
    const WIDTH: u8 = 8;

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    #[inline]
    fn from_f64_lossy(x: f64) -> Self {
        x
    }
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8-byte scalar"))
    }
}

/// Dot product with an `f64` accumulator.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x.as_f64() * y.as_f64()).sum()
}

/// `y += alpha * x`, computed in `T`.
#[inline]
pub fn axpy<T: Scalar>(alpha: f64, x: &[T], y: &mut [T]) {
    let a = T::from_f64_lossy(alpha);
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

pub fn norm<T: Scalar>(a: &[T]) -> f64 {
    dot(a, a).sqrt()
}
