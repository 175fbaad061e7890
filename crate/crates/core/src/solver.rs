//! One implicit Euler step of the flow, i.e. the proximal map
//!
//! ```text
//! u = argmin (1/2 tau) |u - f|_{-s}^2 + sum_j |(grad u)_j|
//! ```
//!
//! solved through its dual `min_{|z|_inf <= 1} F(z)`,
//! `F(z) = (1/2 tau) |tau L^s div z + f|_{-s}^2`, by projected gradient steps
//!
//! ```text
//! z <- P_Z(z - lambda grad(f + tau L^s div z))
//! ```
//!
//! with `div = grad^T`. The primal iterate is `u = f + tau L^s div z`. Along
//! the iteration `grad u` is exactly the dual gradient `dF/dz`, so the Fenchel
//! gap reduces to `sum_j |(grad u)_j| + <grad u, z>` and costs O(N).

use crate::error::{check_len, Error, Result};
use crate::ops::{self, DualField, PrimalField};
use crate::scalar::{dot, mean, norm_inf, Scalar};
use crate::spectral::{FracSign, SpectralCache, Workspace};

/// Splitting step `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize<T> {
    /// `safety * stability_max_lambda`.
    Auto,
    Fixed(T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams<T> {
    /// Fractional index in `[0, 1]`.
    pub s: T,
    /// Implicit time step.
    pub tau: T,
    pub lambda: StepSize<T>,
    /// Stop once `|z^{k+1} - z^k|_inf < tol_z`.
    pub tol_z: T,
    /// Stop once `gap / (1 + |primal|) < tol_gap`.
    pub tol_gap: T,
    pub max_iter: usize,
    /// Accumulate ergodic averages of `z` and `v`.
    pub ergodic: bool,
    /// Ergodic weights `beta_k = (k + 1)^(-p)`, `p` in `(1/2, 1]`.
    pub ergodic_exponent: T,
    /// Fraction of the stability bound used by [`StepSize::Auto`].
    pub safety: T,
    /// Keep a per-iteration [`IterationRecord`] log.
    pub record_history: bool,
}

impl<T: Scalar> SolverParams<T> {
    pub fn new(s: T, tau: T) -> Self {
        Self {
            s,
            tau,
            lambda: StepSize::Auto,
            tol_z: T::lit(1e-8),
            tol_gap: T::lit(1e-7),
            max_iter: 200_000,
            ergodic: false,
            ergodic_exponent: T::one(),
            safety: T::lit(0.9),
            record_history: true,
        }
    }

    pub fn with_lambda(mut self, lambda: T) -> Self {
        self.lambda = StepSize::Fixed(lambda);
        self
    }

    /// Checks every parameter against `cache` and returns the step `lambda`
    /// that will be used.
    pub fn resolve_lambda(&self, cache: &SpectralCache<T>) -> Result<T> {
        if !(self.s >= T::zero() && self.s <= T::one()) {
            return Err(Error::Config(format!(
                "s must lie in [0, 1], got {}",
                self.s
            )));
        }
        if (self.s - cache.s()).abs() > T::epsilon() {
            return Err(Error::Config(format!(
                "solver s = {} does not match spectral cache s = {}",
                self.s,
                cache.s()
            )));
        }
        if !(self.tau > T::zero()) || !self.tau.is_finite() {
            return Err(Error::Config(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.tol_z >= T::zero()) || !(self.tol_gap >= T::zero()) {
            return Err(Error::Config("tolerances must be non-negative".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(self.safety > T::zero() && self.safety < T::one()) {
            return Err(Error::Config(format!(
                "safety must lie in (0, 1), got {}",
                self.safety
            )));
        }
        if !(self.ergodic_exponent > T::lit(0.5) && self.ergodic_exponent <= T::one()) {
            return Err(Error::Config(format!(
                "ergodic exponent must lie in (1/2, 1], got {}",
                self.ergodic_exponent
            )));
        }
        let bound = stability_max_lambda(self.s, self.tau, cache);
        match self.lambda {
            StepSize::Auto => Ok(self.safety * bound),
            StepSize::Fixed(lambda) => {
                if !(lambda > T::zero()) {
                    return Err(Error::Config(format!(
                        "lambda must be positive, got {lambda}"
                    )));
                }
                if !(lambda < bound) {
                    return Err(Error::Config(format!(
                        "lambda = {lambda:e} violates the stability bound \
                         mu_max^(s+1) * lambda * tau < 2 (lambda must be < {bound:e})"
                    )));
                }
                Ok(lambda)
            }
        }
    }
}

/// Largest stable splitting step, `2 / (tau * mu_max^(s+1))`.
pub fn stability_max_lambda<T: Scalar>(s: T, tau: T, cache: &SpectralCache<T>) -> T {
    T::lit(2.0) / (tau * cache.mu_max().powf(s + T::one()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord<T> {
    /// `F(z^k)`.
    pub dual_energy: T,
    /// `(1/2 tau) |u^k - f|_{-s}^2 + sum_j |(grad u^k)_j|`.
    pub primal_energy: T,
    pub gap: T,
    /// `|z^k - z^{k-1}|_inf`; zero for the starting point.
    pub dz_inf: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicIterates<T> {
    pub u: Vec<T>,
    pub z: Vec<T>,
    pub v: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct ProxResult<T> {
    pub u: PrimalField<T>,
    pub z: DualField<T>,
    /// `v = -L^s div z`, so that `u = f - tau v`.
    pub v: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub gap: T,
    pub relative_gap: T,
    pub dual_energy: T,
    pub primal_energy: T,
    /// Records for `z^0, ..., z^iterations` when history is enabled.
    pub history: Vec<IterationRecord<T>>,
    pub ergodic: Option<ErgodicIterates<T>>,
}

/// How `L^s` is applied inside the iteration.
#[derive(Debug, Clone, Copy)]
enum PowerKernel {
    /// `s = 0`: projection onto mean-zero vectors.
    MeanZero,
    /// `s = 1`: second-difference stencil.
    Stencil,
    Spectral,
}

/// Reusable solver state for one `(cache, params)` pair.
pub struct ProxSolver<'a, T: Scalar> {
    cache: &'a SpectralCache<T>,
    params: SolverParams<T>,
    lambda: T,
    bound: T,
    kernel: PowerKernel,
    ws: Workspace<T>,
    d: Vec<T>,
    p: Vec<T>,
    u: Vec<T>,
    g: Vec<T>,
    tmp: Vec<T>,
}

impl<'a, T: Scalar> ProxSolver<'a, T> {
    pub fn new(cache: &'a SpectralCache<T>, params: SolverParams<T>) -> Result<Self> {
        let lambda = params.resolve_lambda(cache)?;
        let bound = stability_max_lambda(params.s, params.tau, cache);
        let kernel = if params.s == T::zero() {
            PowerKernel::MeanZero
        } else if params.s == T::one() {
            PowerKernel::Stencil
        } else {
            PowerKernel::Spectral
        };
        let n = cache.len();
        Ok(Self {
            cache,
            params,
            lambda,
            bound,
            kernel,
            ws: cache.workspace(),
            d: vec![T::zero(); n],
            p: vec![T::zero(); n],
            u: vec![T::zero(); n],
            g: vec![T::zero(); n],
            tmp: vec![T::zero(); n],
        })
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn params(&self) -> &SolverParams<T> {
        &self.params
    }

    /// `stability_max_lambda` for this solver's `(s, tau)`.
    pub fn bound(&self) -> T {
        self.bound
    }

    /// Fills `d = div z`, `p = L^s d`, `u = f + tau p` and `g = grad u`.
    fn evaluate(&mut self, z: &[T], f: &[T]) {
        let h = self.cache.grid().h();
        ops::div_into(z, h, &mut self.d);
        match self.kernel {
            PowerKernel::MeanZero => {
                let m = mean(&self.d);
                for (p, &d) in self.p.iter_mut().zip(&self.d) {
                    *p = d - m;
                }
            }
            PowerKernel::Stencil => {
                ops::grad_into(&self.d, h, &mut self.tmp);
                ops::div_into(&self.tmp, h, &mut self.p);
            }
            PowerKernel::Spectral => {
                self.cache
                    .apply_frac_power_into(&self.d, FracSign::Pos, &mut self.p, &mut self.ws);
            }
        }
        let tau = self.params.tau;
        for ((u, &f), &p) in self.u.iter_mut().zip(f).zip(&self.p) {
            *u = f + tau * p;
        }
        ops::grad_into(&self.u, h, &mut self.g);
    }

    /// `(dual energy - (1/2 tau)|f|^2_{-s}, primal energy, gap)` at the last
    /// evaluated point.
    fn energies(&self, z: &[T], f: &[T]) -> (T, T, T) {
        let half_tau = self.params.tau * T::lit(0.5);
        let quad = half_tau * dot(&self.d, &self.p);
        let dual = quad + dot(&self.d, f);
        let tv: T = self.g.iter().map(|g| g.abs()).sum();
        let primal = quad + tv;
        let gap = tv + dot(&self.g, z);
        (dual, primal, gap)
    }

    /// One projected gradient step from `z`.
    pub fn dual_step(&mut self, z: &DualField<T>, f: &[T]) -> Result<DualField<T>> {
        check_len(self.cache.len(), z.len())?;
        check_len(self.cache.len(), f.len())?;
        self.evaluate(z, f);
        let lambda = self.lambda;
        let next: Vec<T> = z
            .iter()
            .zip(&self.g)
            .map(|(&zj, &gj)| ops::project_scalar(zj - lambda * gj))
            .collect();
        if next.iter().any(|x| !x.is_finite()) {
            return Err(self.divergence(1));
        }
        DualField::new(next)
    }

    fn divergence(&self, iteration: usize) -> Error {
        Error::Divergence {
            iteration,
            lambda: self.lambda.to_f64().unwrap_or(f64::NAN),
            bound: self.bound.to_f64().unwrap_or(f64::NAN),
        }
    }

    /// Iterates from `z^0 = warm` (or zero) until a stopping rule fires.
    ///
    /// Reaching `max_iter` is not an error; the result then has
    /// `converged == false`.
    pub fn solve(&mut self, f: &[T], warm: Option<&DualField<T>>) -> Result<ProxResult<T>> {
        let n = self.cache.len();
        check_len(n, f.len())?;
        if let Some(j) = f.iter().position(|x| !x.is_finite()) {
            return Err(Error::Config(format!(
                "non-finite input value at index {j}"
            )));
        }
        let mut z: Vec<T> = match warm {
            Some(w) => {
                check_len(n, w.len())?;
                w.to_vec()
            }
            None => vec![T::zero(); n],
        };
        let f_norm2 = self.cache.hs_inner(f, f)?;
        let energy_offset = f_norm2 / (T::lit(2.0) * self.params.tau);
        let mut averager = self.params.ergodic.then(|| {
            (
                ErgodicAverage::new(n, self.params.ergodic_exponent),
                ErgodicAverage::new(n, self.params.ergodic_exponent),
            )
        });
        let mut history = Vec::new();

        self.evaluate(&z, f);
        let (mut dual, mut primal, mut gap) = self.energies(&z, f);
        if self.params.record_history {
            history.push(IterationRecord {
                dual_energy: dual + energy_offset,
                primal_energy: primal,
                gap,
                dz_inf: T::zero(),
            });
        }
        if let Some((az, av)) = averager.as_mut() {
            az.push(&z);
            av.push_negated(&self.p);
        }

        let lambda = self.lambda;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.params.max_iter {
            iterations += 1;
            let mut dz = T::zero();
            for (zj, &gj) in z.iter_mut().zip(&self.g) {
                let next = ops::project_scalar(*zj - lambda * gj);
                dz = dz.max((next - *zj).abs());
                *zj = next;
            }
            self.evaluate(&z, f);
            (dual, primal, gap) = self.energies(&z, f);
            if !(dual.is_finite() && primal.is_finite() && gap.is_finite()) {
                return Err(self.divergence(iterations));
            }
            if self.params.record_history {
                history.push(IterationRecord {
                    dual_energy: dual + energy_offset,
                    primal_energy: primal,
                    gap,
                    dz_inf: dz,
                });
            }
            if let Some((az, av)) = averager.as_mut() {
                az.push(&z);
                av.push_negated(&self.p);
            }
            let rel_gap = gap / (T::one() + primal.abs());
            if dz == T::zero() || dz < self.params.tol_z || rel_gap < self.params.tol_gap {
                converged = true;
                break;
            }
        }

        let tau = self.params.tau;
        let v: Vec<T> = self.p.iter().map(|&p| -p).collect();
        let ergodic = averager.map(|(az, av)| {
            let v_bar = av.into_average();
            let u_bar = f.iter().zip(&v_bar).map(|(&f, &v)| f - tau * v).collect();
            ErgodicIterates {
                u: u_bar,
                z: az.into_average(),
                v: v_bar,
            }
        });
        Ok(ProxResult {
            u: PrimalField::from_vec_unchecked(self.u.clone()),
            z: DualField::new(z)?,
            v,
            iterations,
            converged,
            gap,
            relative_gap: gap / (T::one() + primal.abs()),
            dual_energy: dual + energy_offset,
            primal_energy: primal,
            history,
            ergodic,
        })
    }
}

/// One step of the dual iteration, `P_Z(z - lambda grad(f + tau L^s div z))`.
pub fn dual_step<T: Scalar>(
    z: &DualField<T>,
    f: &[T],
    params: &SolverParams<T>,
    cache: &SpectralCache<T>,
) -> Result<DualField<T>> {
    ProxSolver::new(cache, params.clone())?.dual_step(z, f)
}

/// Proximal step from `z^0 = 0`.
pub fn solve_prox<T: Scalar>(
    f: &[T],
    params: &SolverParams<T>,
    cache: &SpectralCache<T>,
) -> Result<ProxResult<T>> {
    ProxSolver::new(cache, params.clone())?.solve(f, None)
}

/// Fenchel gap of a primal-dual pair, evaluated with spectral `H^{-s}` norms:
///
/// ```text
/// [(1/2 tau)|u - f|^2 + sum|grad u|] + (1/2 tau)|tau L^s div z + f|^2 - (1/2 tau)|f|^2
/// ```
///
/// `u` must equal `f + tau L^s div z` (up to round-off).
pub fn duality_gap<T: Scalar>(
    u: &[T],
    z: &[T],
    f: &[T],
    params: &SolverParams<T>,
    cache: &SpectralCache<T>,
) -> Result<T> {
    let n = cache.len();
    check_len(n, u.len())?;
    check_len(n, z.len())?;
    check_len(n, f.len())?;
    if norm_inf(z) > T::one() {
        return Err(Error::Contract("dual field outside the unit ball".into()));
    }
    let grid = cache.grid();
    let tau = params.tau;
    let p = cache.apply_frac_power(&ops::div(z, grid), FracSign::Pos)?;
    let recovered: Vec<T> = f.iter().zip(&p).map(|(&f, &p)| f + tau * p).collect();
    let scale = T::one() + norm_inf(f) + norm_inf(u);
    let mismatch = u
        .iter()
        .zip(&recovered)
        .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
    if mismatch > T::lit(1e-8).max(T::epsilon().sqrt()) * scale {
        return Err(Error::Contract(format!(
            "u is not f + tau L^s div z (max deviation {mismatch:e})"
        )));
    }
    let two_tau = T::lit(2.0) * tau;
    let diff: Vec<T> = u.iter().zip(f).map(|(&a, &b)| a - b).collect();
    let primal = cache.hs_inner(&diff, &diff)? / two_tau + ops::tv_discrete(u, grid);
    let dual = cache.hs_inner(&recovered, &recovered)? / two_tau;
    let offset = cache.hs_inner(f, f)? / two_tau;
    Ok(primal + dual - offset)
}

/// Running weighted average `sum_k alpha_k w^k`, `alpha_k = beta_k / sum_j beta_j`
/// with `beta_k = (k + 1)^(-p)`. Stores only the current average.
#[derive(Debug, Clone)]
pub struct ErgodicAverage<T> {
    average: Vec<T>,
    weight_sum: T,
    count: usize,
    exponent: T,
}

impl<T: Scalar> ErgodicAverage<T> {
    pub fn new(n: usize, exponent: T) -> Self {
        Self {
            average: vec![T::zero(); n],
            weight_sum: T::zero(),
            count: 0,
            exponent,
        }
    }

    pub fn weight(&self, k: usize) -> T {
        T::from_count(k + 1).powf(-self.exponent)
    }

    pub fn push(&mut self, w: &[T]) {
        self.push_scaled(w, T::one());
    }

    fn push_negated(&mut self, w: &[T]) {
        self.push_scaled(w, -T::one());
    }

    fn push_scaled(&mut self, w: &[T], sign: T) {
        let beta = self.weight(self.count);
        self.weight_sum = self.weight_sum + beta;
        let alpha = beta / self.weight_sum;
        for (a, &x) in self.average.iter_mut().zip(w) {
            *a = *a + alpha * (sign * x - *a);
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn average(&self) -> &[T] {
        &self.average
    }

    pub fn into_average(self) -> Vec<T> {
        self.average
    }
}

/// Normalized ergodic weights `alpha_0..alpha_n`.
pub fn ergodic_weights<T: Scalar>(n: usize, exponent: T) -> Vec<T> {
    let beta: Vec<T> = (0..=n)
        .map(|k| T::from_count(k + 1).powf(-exponent))
        .collect();
    let total: T = beta.iter().copied().sum();
    beta.into_iter().map(|b| b / total).collect()
}

/// Ergodic average of a stored sequence of iterates.
pub fn ergodic_average<T: Scalar>(iterates: &[Vec<T>], exponent: T) -> Vec<T> {
    let n = iterates.first().map_or(0, |w| w.len());
    let mut avg = ErgodicAverage::new(n, exponent);
    for w in iterates {
        avg.push(w);
    }
    avg.into_average()
}
