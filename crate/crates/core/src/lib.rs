//! Total variation gradient flow in `H^{-s}`, `0 <= s <= 1`, on a periodic
//! one-dimensional grid.
//!
//! Each implicit Euler step is a proximal problem solved on its dual by
//! projected gradient iterations; fractional powers of the periodic Laplacian
//! are applied as Fourier multipliers. All numerical code is generic over
//! [`Scalar`] (`f32` or `f64`); the aliases below fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod flow;
pub mod grid;
pub mod ops;
pub mod scalar;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use flow::{detect_extinction, discrete_speed, evolve, FlowParams, StepRecord, Trajectory};
pub use grid::Grid;
pub use ops::{div, grad, project_ball, tv, tv_discrete, DualField, PrimalField};
pub use scalar::Scalar;
pub use solver::{
    dual_step, duality_gap, ergodic_average, ergodic_weights, solve_prox, stability_max_lambda,
    ErgodicAverage, IterationRecord, ProxResult, ProxSolver, SolverParams, StepSize,
};
pub use spectral::{dft, laplacian_eigenvalues, FracSign, SpectralCache, Spectrum};

pub type Grid64 = Grid<f64>;
pub type Grid32 = Grid<f32>;
pub type SpectralCache64 = SpectralCache<f64>;
pub type SpectralCache32 = SpectralCache<f32>;
pub type SolverParams64 = SolverParams<f64>;
pub type SolverParams32 = SolverParams<f32>;
pub type FlowParams64 = FlowParams<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type ProxResult64 = ProxResult<f64>;
