//! Floating point abstraction shared by every numerical module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the solver can run on: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + LowerExp
    + rustfft::FftNum
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Conversion from a count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Threshold below which the imaginary residue of an inverse transform
    /// of a conjugate-symmetric spectrum counts as round-off.
    fn residue_tolerance(n: usize) -> Self {
        let floor = Self::lit(1e-10);
        let scaled = Self::epsilon() * Self::lit(100.0) * Self::from_count(n.max(1));
        floor.max(scaled)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub(crate) fn norm_inf<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

pub(crate) fn mean<T: Scalar>(a: &[T]) -> T {
    a.iter().copied().sum::<T>() / T::from_count(a.len())
}

/// `max - min` of a non-empty slice.
pub fn oscillation<T: Scalar>(a: &[T]) -> T {
    let (lo, hi) = a
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    if a.is_empty() {
        T::zero()
    } else {
        hi - lo
    }
}
