//! Implicit time stepping `u(t_i) = J_tau u(t_{i-1})` of the `H^{-s}` total
//! variation flow, where `J_tau` is the proximal map of [`crate::solver`].

use crate::error::{check_len, Error, Result};
use crate::ops::{self, DualField, PrimalField};
use crate::scalar::{mean, oscillation, Scalar};
use crate::solver::{ProxSolver, SolverParams};
use crate::spectral::SpectralCache;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowParams<T> {
    /// Number of implicit steps; final time is `steps * tau`.
    pub steps: usize,
    pub snapshot_every: usize,
    pub solver: SolverParams<T>,
    /// Start each inner solve from the previous step's dual field.
    pub warm_start: bool,
    /// Fail on the first inner solve that hits `max_iter`.
    pub abort_on_nonconverged: bool,
    /// Stop once `max u - min u` drops below the extinction threshold.
    pub stop_at_extinction: bool,
    /// Extinction threshold; defaults to `1e-3 * (max u0 - min u0)`.
    pub extinction_eps: Option<T>,
}

impl<T: Scalar> FlowParams<T> {
    pub fn new(solver: SolverParams<T>, steps: usize) -> Self {
        Self {
            steps,
            snapshot_every: 1,
            solver,
            warm_start: true,
            abort_on_nonconverged: false,
            stop_at_extinction: true,
            extinction_eps: None,
        }
    }

    pub fn tau(&self) -> T {
        self.solver.tau
    }
}

/// Diagnostics of one outer step `t_{i-1} -> t_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord<T> {
    pub step: usize,
    pub time: T,
    /// `|u(t_i) - u(t_{i-1})|_{-s} / tau`.
    pub speed: T,
    pub iterations: usize,
    pub converged: bool,
    pub gap: T,
    pub relative_gap: T,
    /// Largest nodal jump `max_j |u_{j+1} - u_j|`.
    pub max_jump: T,
}

#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub tau: T,
    /// `t_0 = 0, t_1, ...` for every computed step.
    pub times: Vec<T>,
    /// Total variation `sum_j |u_{j+1} - u_j|` at each time.
    pub tv: Vec<T>,
    /// `max u - min u` at each time.
    pub oscillation: Vec<T>,
    pub mean: Vec<T>,
    pub records: Vec<StepRecord<T>>,
    pub snapshot_times: Vec<T>,
    pub snapshots: Vec<PrimalField<T>>,
    /// First time the oscillation fell below the run's threshold.
    pub extinction: Option<T>,
    pub extinction_eps: T,
    /// Splitting step used by the inner solver.
    pub lambda: T,
}

impl<T: Scalar> Trajectory<T> {
    pub fn final_state(&self) -> &PrimalField<T> {
        self.snapshots
            .last()
            .expect("trajectory always holds the initial snapshot")
    }

    pub fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.converged)
    }
}

fn max_jump<T: Scalar>(u: &[T]) -> T {
    let n = u.len();
    (0..n).fold(T::zero(), |m, j| m.max((u[(j + 1) % n] - u[j]).abs()))
}

/// Runs the implicit scheme from `u0` for `params.steps` steps.
pub fn evolve<T: Scalar>(
    u0: &[T],
    params: &FlowParams<T>,
    cache: &SpectralCache<T>,
) -> Result<Trajectory<T>> {
    check_len(cache.len(), u0.len())?;
    if params.steps == 0 {
        return Err(Error::Config("steps must be at least 1".into()));
    }
    if params.snapshot_every == 0 {
        return Err(Error::Config("snapshot_every must be at least 1".into()));
    }
    let u0 = PrimalField::new(u0.to_vec())?;
    let mut solver_params = params.solver.clone();
    solver_params.record_history = false;
    let mut solver = ProxSolver::new(cache, solver_params)?;
    let tau = params.tau();

    let osc0 = oscillation(&u0);
    let eps = params.extinction_eps.unwrap_or(T::lit(1e-3) * osc0);
    let is_extinct = |osc: T| osc == T::zero() || osc < eps;

    let mut traj = Trajectory {
        tau,
        times: vec![T::zero()],
        tv: vec![ops::tv(&u0)],
        oscillation: vec![osc0],
        mean: vec![mean(&u0)],
        records: Vec::with_capacity(params.steps),
        snapshot_times: vec![T::zero()],
        snapshots: vec![u0.clone()],
        extinction: None,
        extinction_eps: eps,
        lambda: solver.lambda(),
    };
    if is_extinct(osc0) {
        traj.extinction = Some(T::zero());
        if params.stop_at_extinction {
            return Ok(traj);
        }
    }

    let mut u = u0;
    let mut z: Option<DualField<T>> = None;
    for step in 1..=params.steps {
        let warm = if params.warm_start { z.as_ref() } else { None };
        let res = solver.solve(&u, warm)?;
        if !res.converged && params.abort_on_nonconverged {
            return Err(Error::NotConverged {
                step,
                iterations: res.iterations,
            });
        }
        let time = T::from_count(step) * tau;
        let diff: Vec<T> = res.u.iter().zip(u.iter()).map(|(&a, &b)| a - b).collect();
        let speed = cache.hs_norm(&diff)? / tau;
        traj.records.push(StepRecord {
            step,
            time,
            speed,
            iterations: res.iterations,
            converged: res.converged,
            gap: res.gap,
            relative_gap: res.relative_gap,
            max_jump: max_jump(&res.u),
        });
        u = res.u;
        z = Some(res.z);

        let osc = oscillation(&u);
        traj.times.push(time);
        traj.tv.push(ops::tv(&u));
        traj.oscillation.push(osc);
        traj.mean.push(mean(&u));

        let extinct_now = traj.extinction.is_none() && is_extinct(osc);
        if extinct_now {
            traj.extinction = Some(time);
        }
        let stop = extinct_now && params.stop_at_extinction;
        if step % params.snapshot_every == 0 || step == params.steps || stop {
            traj.snapshot_times.push(time);
            traj.snapshots.push(u.clone());
        }
        if stop {
            break;
        }
    }
    Ok(traj)
}

/// First recorded time with `max u - min u < eps`.
pub fn detect_extinction<T: Scalar>(traj: &Trajectory<T>, eps: T) -> Option<T> {
    traj.times
        .iter()
        .zip(&traj.oscillation)
        .find(|(_, &osc)| osc < eps || osc == T::zero())
        .map(|(&t, _)| t)
}

/// Discrete speeds `|u(t_i) - u(t_{i-1})|_{-s} / tau`, one per step.
pub fn discrete_speed<T: Scalar>(traj: &Trajectory<T>) -> Result<Vec<T>> {
    if traj.records.is_empty() {
        return Err(Error::Contract(
            "discrete speed needs at least two time levels".into(),
        ));
    }
    Ok(traj.records.iter().map(|r| r.speed).collect())
}
