//! Scalar abstraction shared by real and complex sparse storage.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

/// Complex double, the working type of all vector data.
#[allow(non_camel_case_types)]
pub type c64 = Complex64;

/// Entry type of a sparse matrix: `f64` for coefficient matrices,
/// [`c64`] for assembled shifted matrices and their factors.
pub trait Scalar:
    Copy
    + Debug
    + Default
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn to_c64(self) -> c64;
    fn conj(self) -> Self;
    fn abs(self) -> f64;
    fn re(self) -> f64;
    /// `self * x` without promoting `self` first.
    fn mul_c(self, x: c64) -> c64;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn one() -> Self {
        1.0
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_c64(self) -> c64 {
        c64::new(self, 0.0)
    }
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn mul_c(self, x: c64) -> c64 {
        c64::new(self * x.re, self * x.im)
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for c64 {
    #[inline]
    fn zero() -> Self {
        c64::new(0.0, 0.0)
    }
    #[inline]
    fn one() -> Self {
        c64::new(1.0, 0.0)
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        c64::new(x, 0.0)
    }
    #[inline]
    fn to_c64(self) -> c64 {
        self
    }
    #[inline]
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    #[inline]
    fn abs(self) -> f64 {
        self.norm()
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    #[inline]
    fn mul_c(self, x: c64) -> c64 {
        self * x
    }
    #[inline]
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
}

/// Euclidean norm of a complex slice.
pub fn norm2(x: &[c64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermitian inner product `x^H y`.
pub fn dotc(x: &[c64], y: &[c64]) -> c64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// `y += a x`
pub fn axpy(a: c64, x: &[c64], y: &mut [c64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
