//! Real or complex field used by the transform pipelines.
//!
//! Every Laplace-transform routine is written once over [`Scalar`] so the
//! same code serves real `λ` (probabilities, prices) and complex `λ` on an
//! inversion contour.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

pub trait Scalar:
    Copy
    + Send
    + Sync
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
{
    const IS_REAL: bool;

    fn from_real(x: f64) -> Self;
    fn norm(self) -> f64;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn exp(self) -> Self;
    fn expm1(self) -> Self;
    fn sqrt(self) -> Self;

    fn is_finite(self) -> bool {
        self.re().is_finite() && self.im().is_finite()
    }

    fn zero() -> Self {
        Self::from_real(0.0)
    }

    fn one() -> Self {
        Self::from_real(1.0)
    }
}

impl Scalar for f64 {
    const IS_REAL: bool = true;

    fn from_real(x: f64) -> Self {
        x
    }
    fn norm(self) -> f64 {
        self.abs()
    }
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn expm1(self) -> Self {
        f64::exp_m1(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

impl Scalar for Complex64 {
    const IS_REAL: bool = false;

    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn norm(self) -> f64 {
        Complex64::norm(self)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn expm1(self) -> Self {
        // e^{x+iy} - 1 with the real part assembled from expm1(x) and sin²(y/2)
        let (s, c) = self.im.sin_cos();
        let half = (0.5 * self.im).sin();
        let em1 = self.re.exp_m1();
        Complex64::new(em1 * c - 2.0 * half * half, (em1 + 1.0) * s)
    }
    fn sqrt(self) -> Self {
        Complex64::sqrt(self)
    }
}

/// (1 − e^{−w}) / w, continuous at w = 0.
pub(crate) fn one_minus_exp_neg_over<T: Scalar>(w: T) -> T {
    if w.norm() < 1e-8 {
        T::one() - w * 0.5
    } else {
        -(-w).expm1() / w
    }
}
