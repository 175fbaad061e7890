//! Periodic forward differences, their transpose, total variation and the
//! pointwise projection onto the unit ball.
//!
//! All routines act on a single vector component; a 2D extension only needs
//! to widen the dual field and replace `abs` by the Euclidean norm in
//! [`project_ball`] and [`tv`].

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;

/// Real field on the grid nodes. Entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalField<T>(Vec<T>);

impl<T: Scalar> PrimalField<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(j) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::Config(format!("non-finite value at index {j}")));
        }
        Ok(Self(values))
    }

    pub fn constant(n: usize, c: T) -> Self {
        Self(vec![c; n])
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub(crate) fn from_vec_unchecked(values: Vec<T>) -> Self {
        Self(values)
    }
}

impl<T> Deref for PrimalField<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// Dual vector field with `|z_j| <= 1` for every node.
#[derive(Debug, Clone, PartialEq)]
pub struct DualField<T>(Vec<T>);

impl<T: Scalar> DualField<T> {
    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    /// Wraps `values`, failing if any entry leaves the unit ball.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(j) = values.iter().position(|x| !(x.abs() <= T::one())) {
            return Err(Error::Contract(format!(
                "dual field entry {j} = {} outside the unit ball",
                values[j]
            )));
        }
        Ok(Self(values))
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> Deref for DualField<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// `(grad u)_j = (u_{j+1} - u_j) / h`, indices mod `N`.
pub fn grad<T: Scalar>(u: &[T], grid: &Grid<T>) -> Vec<T> {
    let mut out = vec![T::zero(); u.len()];
    grad_into(u, grid.h(), &mut out);
    out
}

pub(crate) fn grad_into<T: Scalar>(u: &[T], h: T, out: &mut [T]) {
    let n = u.len();
    let inv_h = T::one() / h;
    for j in 0..n - 1 {
        out[j] = (u[j + 1] - u[j]) * inv_h;
    }
    out[n - 1] = (u[0] - u[n - 1]) * inv_h;
}

/// Exact transpose of [`grad`]: `(div z)_j = (z_{j-1} - z_j) / h`.
pub fn div<T: Scalar>(z: &[T], grid: &Grid<T>) -> Vec<T> {
    let mut out = vec![T::zero(); z.len()];
    div_into(z, grid.h(), &mut out);
    out
}

pub(crate) fn div_into<T: Scalar>(z: &[T], h: T, out: &mut [T]) {
    let n = z.len();
    let inv_h = T::one() / h;
    out[0] = (z[n - 1] - z[0]) * inv_h;
    for j in 1..n {
        out[j] = (z[j - 1] - z[j]) * inv_h;
    }
}

/// Total variation of the piecewise constant interpolant,
/// `sum_j |u_{j+1} - u_j|`.
pub fn tv<T: Scalar>(u: &[T]) -> T {
    let n = u.len();
    (0..n).map(|j| (u[(j + 1) % n] - u[j]).abs()).sum()
}

/// The functional the dual solver actually minimizes against:
/// `sum_j |(grad u)_j| = tv(u) / h`.
pub fn tv_discrete<T: Scalar>(u: &[T], grid: &Grid<T>) -> T {
    tv(u) / grid.h()
}

/// `z_j = y_j / max(|y_j|, 1)`.
pub fn project_ball<T: Scalar>(y: &[T]) -> DualField<T> {
    DualField(y.iter().map(|&v| project_scalar(v)).collect())
}

#[inline]
pub(crate) fn project_scalar<T: Scalar>(v: T) -> T {
    v / v.abs().max(T::one())
}
