//! Scalar traits shared by the toolkit.

use nalgebra::{Complex, DMatrix, DVector, RealField};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};
use std::fmt::Debug;

/// Floating scalar used by the quantum (matrix) modules.
pub trait Real: RealField + Copy + Default {
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn to_f64(self) -> f64 {
        self
    }
}

/// Converts an `f64` literal to `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

/// Ordered field used by the classical transport solver.
///
/// Floats compare against a small pivot tolerance; exact rationals compare
/// against zero.
pub trait Field: Clone + PartialOrd + Num + Signed + FromPrimitive + Debug {
    /// Values with magnitude at or below this are treated as zero.
    fn pivot_eps() -> Self;
    fn to_f64_lossy(&self) -> f64;

    fn is_negligible(&self) -> bool {
        self.abs() <= Self::pivot_eps()
    }
}

impl Field for f64 {
    fn pivot_eps() -> Self {
        1e-14
    }
    fn to_f64_lossy(&self) -> f64 {
        *self
    }
}

impl Field for f32 {
    fn pivot_eps() -> Self {
        1e-6
    }
    fn to_f64_lossy(&self) -> f64 {
        *self as f64
    }
}

impl Field for BigRational {
    fn pivot_eps() -> Self {
        BigRational::zero()
    }
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Exact rational from an `f64` (every finite double is a dyadic rational).
pub fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap_or_else(|| BigRational::from_integer(BigInt::zero()))
}

pub type C<T> = Complex<T>;
pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

#[inline]
pub fn cr<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

#[inline]
pub fn cabs<T: Real>(z: Complex<T>) -> T {
    nalgebra::ComplexField::modulus(z)
}

#[inline]
pub fn ci<T: Real>(im: T) -> Complex<T> {
    Complex::new(T::zero(), im)
}
