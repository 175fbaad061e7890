//! Discrete Fourier transform, eigenstructure of the periodic second-difference
//! operator `L = grad^T grad`, and its fractional powers.
//!
//! Transform convention: `U_k = sum_j u_j exp(-2 pi i j k / N)` forward, with the
//! `1/N` factor on the inverse. Fractional powers act as Fourier multipliers
//! `mu_k^p` with the `k = 0` multiplier set to zero for every `p`, i.e. all
//! powers (including `p = 0`) are taken on the mean-zero subspace and negative
//! powers are pseudo-inverses.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::scalar::{norm2, Scalar};

/// Fourier coefficients of a real grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub coefficients: Vec<Complex<T>>,
}

impl<T: Scalar> Spectrum<T> {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Inverse transform, keeping the complex result.
    pub fn inverse(&self) -> Vec<Complex<T>> {
        let n = self.len();
        let mut buf = self.coefficients.clone();
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        let scale = T::one() / T::from_count(n);
        buf.iter().map(|c| c * scale).collect()
    }

    /// Inverse transform of a spectrum that should come from real data.
    ///
    /// Fails with [`Error::Consistency`] if the imaginary residue exceeds the
    /// round-off threshold relative to the result norm.
    pub fn inverse_real(&self) -> Result<Vec<T>> {
        let complex = self.inverse();
        take_real(&complex)
    }
}

fn take_real<T: Scalar>(complex: &[Complex<T>]) -> Result<Vec<T>> {
    let re: Vec<T> = complex.iter().map(|c| c.re).collect();
    let residue = complex.iter().fold(T::zero(), |m, c| m.max(c.im.abs()));
    let scale = norm2(&re).max(T::min_positive_value());
    if residue > T::residue_tolerance(complex.len()) * scale.max(T::one()) {
        return Err(Error::Consistency(format!(
            "imaginary residue {residue:e} after inverse transform of a real field"
        )));
    }
    Ok(re)
}

/// Forward DFT of a real vector.
pub fn dft<T: Scalar>(u: &[T]) -> Spectrum<T> {
    let mut buf: Vec<Complex<T>> = u.iter().map(|&x| Complex::new(x, T::zero())).collect();
    if !buf.is_empty() {
        FftPlanner::new()
            .plan_fft_forward(buf.len())
            .process(&mut buf);
    }
    Spectrum { coefficients: buf }
}

/// Eigenvalues of `L = grad^T grad` on `grid`, obtained as the DFT of the
/// circulant first row `(2, -1, 0, ..., 0, -1) / h^2`.
pub fn laplacian_eigenvalues<T: Scalar>(grid: &Grid<T>) -> Vec<T> {
    let n = grid.len();
    let inv_h2 = T::one() / (grid.h() * grid.h());
    let mut row = vec![T::zero(); n];
    row[0] = row[0] + T::lit(2.0) * inv_h2;
    row[1] = row[1] - inv_h2;
    row[n - 1] = row[n - 1] - inv_h2;

    let spectrum = dft(&row);
    let max = spectrum
        .coefficients
        .iter()
        .fold(T::zero(), |m, c| m.max(c.re.abs()));
    let cutoff = T::lit(1e-12) * max;
    let mut mu: Vec<T> = spectrum
        .coefficients
        .iter()
        .map(|c| {
            debug_assert!(c.im.abs() <= cutoff.max(T::epsilon() * max * T::lit(16.0)));
            if c.re.abs() <= cutoff {
                T::zero()
            } else {
                c.re.max(T::zero())
            }
        })
        .collect();
    // Constants span the kernel; pin the zero mode exactly.
    mu[0] = T::zero();
    mu
}

/// Which precomputed fractional power to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracSign {
    /// `L^s`
    Pos,
    /// `L^{-s}` (pseudo-inverse)
    Neg,
}

/// Scratch buffers for in-place spectral multiplication.
pub(crate) struct Workspace<T> {
    buf: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
}

/// Eigenvalues of `L` on a grid together with their `±s` powers and FFT plans.
///
/// Immutable after construction; share it freely between threads.
#[derive(Clone)]
pub struct SpectralCache<T: Scalar> {
    grid: Grid<T>,
    s: T,
    mu: Vec<T>,
    mu_pow_s: Vec<T>,
    mu_pow_neg_s: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Scalar> fmt::Debug for SpectralCache<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralCache")
            .field("grid", &self.grid)
            .field("s", &self.s)
            .field("mu_max", &self.mu_max())
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> SpectralCache<T> {
    pub fn new(grid: Grid<T>, s: T) -> Result<Self> {
        if !(s >= T::zero() && s <= T::one()) {
            return Err(Error::Config(format!(
                "fractional index s must lie in [0, 1], got {s}"
            )));
        }
        let mu = laplacian_eigenvalues(&grid);
        let mu_pow_s = powers(&mu, s);
        let mu_pow_neg_s = powers(&mu, -s);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.len());
        let inverse = planner.plan_fft_inverse(grid.len());
        Ok(Self {
            grid,
            s,
            mu,
            mu_pow_s,
            mu_pow_neg_s,
            forward,
            inverse,
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn s(&self) -> T {
        self.s
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Eigenvalues `mu_j` of `L`.
    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    pub fn mu_pow_s(&self) -> &[T] {
        &self.mu_pow_s
    }

    pub fn mu_pow_neg_s(&self) -> &[T] {
        &self.mu_pow_neg_s
    }

    pub fn mu_max(&self) -> T {
        self.mu.iter().fold(T::zero(), |m, &x| m.max(x))
    }

    /// Forward DFT with the cached plan.
    pub fn dft(&self, u: &[T]) -> Result<Spectrum<T>> {
        check_len(self.len(), u.len())?;
        let mut buf: Vec<Complex<T>> = u.iter().map(|&x| Complex::new(x, T::zero())).collect();
        self.forward.process(&mut buf);
        Ok(Spectrum { coefficients: buf })
    }

    /// Inverse DFT of a spectrum that should come from a real field.
    pub fn idft_real(&self, spectrum: &Spectrum<T>) -> Result<Vec<T>> {
        check_len(self.len(), spectrum.len())?;
        let mut buf = spectrum.coefficients.clone();
        self.inverse.process(&mut buf);
        let scale = T::one() / T::from_count(self.len());
        buf.iter_mut().for_each(|c| *c = *c * scale);
        take_real(&buf)
    }

    /// `L^{±s} u`, mean-zero by construction.
    pub fn apply_frac_power(&self, u: &[T], sign: FracSign) -> Result<Vec<T>> {
        check_len(self.len(), u.len())?;
        let mut out = vec![T::zero(); u.len()];
        let mut ws = self.workspace();
        let mult = match sign {
            FracSign::Pos => &self.mu_pow_s,
            FracSign::Neg => &self.mu_pow_neg_s,
        };
        self.multiply_into(u, mult, &mut out, &mut ws);
        Ok(out)
    }

    /// `L^p u` for an arbitrary real exponent `p`, on the mean-zero subspace.
    pub fn apply_power(&self, u: &[T], exponent: T) -> Result<Vec<T>> {
        check_len(self.len(), u.len())?;
        let mult = powers(&self.mu, exponent);
        let mut out = vec![T::zero(); u.len()];
        let mut ws = self.workspace();
        self.multiply_into(u, &mult, &mut out, &mut ws);
        Ok(out)
    }

    /// `(u, v)_{-s} = <L^{-s} u, v>`, evaluated in Fourier space.
    pub fn hs_inner(&self, u: &[T], v: &[T]) -> Result<T> {
        let uh = self.dft(u)?;
        let vh = self.dft(v)?;
        let acc = uh
            .coefficients
            .iter()
            .zip(&vh.coefficients)
            .zip(&self.mu_pow_neg_s)
            .skip(1)
            .map(|((a, b), &w)| w * (a * b.conj()).re)
            .sum::<T>();
        Ok(acc / T::from_count(self.len()))
    }

    pub fn hs_norm(&self, u: &[T]) -> Result<T> {
        Ok(self.hs_inner(u, u)?.max(T::zero()).sqrt())
    }

    pub(crate) fn workspace(&self) -> Workspace<T> {
        let n = self.len();
        let scratch_len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        Workspace {
            buf: vec![Complex::new(T::zero(), T::zero()); n],
            scratch: vec![Complex::new(T::zero(), T::zero()); scratch_len],
        }
    }

    /// `out = L^{±s} u` without allocating.
    pub(crate) fn apply_frac_power_into(
        &self,
        u: &[T],
        sign: FracSign,
        out: &mut [T],
        ws: &mut Workspace<T>,
    ) {
        let mult = match sign {
            FracSign::Pos => &self.mu_pow_s,
            FracSign::Neg => &self.mu_pow_neg_s,
        };
        self.multiply_into(u, mult, out, ws);
    }

    fn multiply_into(&self, u: &[T], mult: &[T], out: &mut [T], ws: &mut Workspace<T>) {
        for (b, &x) in ws.buf.iter_mut().zip(u) {
            *b = Complex::new(x, T::zero());
        }
        self.forward
            .process_with_scratch(&mut ws.buf, &mut ws.scratch);
        for (b, &m) in ws.buf.iter_mut().zip(mult) {
            *b = *b * m;
        }
        self.inverse
            .process_with_scratch(&mut ws.buf, &mut ws.scratch);
        let scale = T::one() / T::from_count(self.len());
        // The multiplier is real and symmetric (mu_j = mu_{N-j}), so the
        // imaginary part is pure round-off.
        for (o, b) in out.iter_mut().zip(&ws.buf) {
            *o = b.re * scale;
        }
    }
}

/// `mu_j^p` with the zero mode mapped to 0.
fn powers<T: Scalar>(mu: &[T], p: T) -> Vec<T> {
    mu.iter()
        .enumerate()
        .map(|(j, &m)| {
            if j == 0 || m == T::zero() {
                T::zero()
            } else {
                m.powf(p)
            }
        })
        .collect()
}
