//! Scalar abstraction for the deterministic linear algebra.
//!
//! Everything in [`crate::markov`], [`crate::model`] and [`crate::spectral`] is
//! generic over [`Real`], which is implemented for `f32` and `f64`. Monte Carlo
//! simulation and the experiment harness work in `f64` only.

use nalgebra::{ComplexField, DMatrix, RealField};
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// A real floating-point scalar usable by the dense solvers.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    /// Lossy conversion back to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// A tolerance of `nominal`, floored at a small multiple of machine epsilon
    /// so the same checks stay meaningful in single precision.
    #[inline]
    fn tol(nominal: f64) -> Self {
        let floor = Self::default_epsilon() * Self::lit(64.0);
        let t = Self::lit(nominal);
        if t > floor {
            t
        } else {
            floor
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type C<T> = Complex<T>;

/// Largest entry modulus of a complex matrix.
pub fn norm0<T: Real>(m: &DMatrix<C<T>>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(z.modulus()))
}

/// Largest entry magnitude of a real matrix.
pub fn max_abs<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

pub fn to_complex<T: Real>(m: &DMatrix<T>) -> DMatrix<C<T>> {
    m.map(|x| C::new(x, T::zero()))
}
