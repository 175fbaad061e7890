//! Periodic one-dimensional lattice.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `n` equispaced nodes `x_j = x0 + j*h`, periodic with period `n*h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    n: usize,
    h: T,
    x0: T,
}

impl<T: Scalar> Grid<T> {
    pub fn new(n: usize, h: T, x0: T) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 points, got {n}"
            )));
        }
        if !(h > T::zero()) || !h.is_finite() {
            return Err(Error::Config(format!(
                "grid spacing must be positive, got {h}"
            )));
        }
        if !x0.is_finite() {
            return Err(Error::Config("grid origin must be finite".into()));
        }
        Ok(Self { n, h, x0 })
    }

    /// Grid of spacing `h` covering `[x_min, x_max)`.
    ///
    /// Nodes sit at cell centres `x_min + (j + 1/2) h`, so a grid over a
    /// symmetric interval is itself symmetric about the midpoint. The interval
    /// length must be an integer multiple of `h` to within `1e-9` relative.
    pub fn cell_centered(x_min: T, x_max: T, h: T) -> Result<Self> {
        let n = Self::count_cells(x_min, x_max, h)?;
        Self::new(n, h, x_min + h * T::lit(0.5))
    }

    /// Grid of spacing `h` with nodes `x_min + j h`, `j = 0..n`, where
    /// `x_max` is identified with `x_min`.
    pub fn node_centered(x_min: T, x_max: T, h: T) -> Result<Self> {
        let n = Self::count_cells(x_min, x_max, h)?;
        Self::new(n, h, x_min)
    }

    fn count_cells(x_min: T, x_max: T, h: T) -> Result<usize> {
        if !(x_max > x_min) {
            return Err(Error::Config(format!("empty domain [{x_min}, {x_max}]")));
        }
        if !(h > T::zero()) {
            return Err(Error::Config(format!(
                "grid spacing must be positive, got {h}"
            )));
        }
        let cells = (x_max - x_min) / h;
        let n = cells.round();
        if ((cells - n) / n.max(T::one())).abs() > T::lit(1e-9) {
            return Err(Error::Config(format!(
                "domain length {} is not a multiple of h = {h}",
                x_max - x_min
            )));
        }
        n.to_usize()
            .ok_or_else(|| Error::Config(format!("cannot build a grid with {n} points")))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn x0(&self) -> T {
        self.x0
    }

    /// Period `n*h`.
    pub fn period(&self) -> T {
        self.h * T::from_count(self.n)
    }

    /// Coordinate of node `j` (taken modulo `n`).
    pub fn x(&self, j: usize) -> T {
        self.x0 + T::from_count(j % self.n) * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.n).map(move |j| self.x(j))
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(T) -> T) -> Vec<T> {
        self.nodes().map(f).collect()
    }
}
