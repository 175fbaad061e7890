//! Reference solvers written independently of the library's code paths.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-amp..amp)).collect()
}

pub fn random_mean_zero(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> Vec<f64> {
    let mut f = random_vec(rng, n, amp);
    let m = f.iter().sum::<f64>() / n as f64;
    f.iter_mut().for_each(|x| *x -= m);
    f
}

pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Dense periodic forward-difference matrix, row for row.
pub fn gradient_matrix(n: usize, h: f64) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, i)] -= 1.0 / h;
        d[(i, (i + 1) % n)] += 1.0 / h;
    }
    d
}

/// Projected gradient on the dual of the `s = 0` problem with dense matrices:
/// `z <- clamp(z - lambda D (f + tau D^T z))`, `u = f + tau D^T z`.
pub fn brute_force_rof(f: &[f64], h: f64, tau: f64, lambda: f64, iterations: usize) -> Vec<f64> {
    let n = f.len();
    let d = gradient_matrix(n, h);
    let dt = d.transpose();
    let fv = DVector::from_column_slice(f);
    let mut z = DVector::<f64>::zeros(n);
    let mut u = fv.clone();
    let mut g = DVector::<f64>::zeros(n);
    for _ in 0..iterations {
        u.copy_from(&fv);
        u.gemv(tau, &dt, &z, 1.0);
        g.gemv(1.0, &d, &u, 0.0);
        for i in 0..n {
            z[i] = (z[i] - lambda * g[i]).clamp(-1.0, 1.0);
        }
    }
    u.copy_from(&fv);
    u.gemv(tau, &dt, &z, 1.0);
    u.as_slice().to_vec()
}

/// Minimizes `(1/2 tau)|u - f|^2 + sum_j sqrt((Du)_j^2 + eps^2)` by damped Newton,
/// continued from `eps = 1` down to the requested value.
pub fn smoothed_rof(f: &[f64], h: f64, tau: f64, eps: f64) -> Vec<f64> {
    let n = f.len();
    let d = gradient_matrix(n, h);
    let dt = d.transpose();
    let fv = DVector::from_column_slice(f);
    let mut u = fv.clone();
    let mut level = 1.0f64.max(eps);
    loop {
        newton_smoothed(&mut u, &fv, &d, &dt, tau, level);
        if level <= eps {
            break;
        }
        level = (level * 0.3).max(eps);
    }
    u.as_slice().to_vec()
}

fn newton_smoothed(
    u: &mut DVector<f64>,
    fv: &DVector<f64>,
    d: &DMatrix<f64>,
    dt: &DMatrix<f64>,
    tau: f64,
    eps: f64,
) {
    let n = u.len();
    let energy = |u: &DVector<f64>| {
        let du = d * u;
        (u - fv).norm_squared() / (2.0 * tau)
            + du.iter().map(|t| (t * t + eps * eps).sqrt()).sum::<f64>()
    };
    for _ in 0..200 {
        let du = d * &*u;
        let phi1 = du.map(|t| t / (t * t + eps * eps).sqrt());
        let phi2 = du.map(|t| eps * eps / (t * t + eps * eps).powf(1.5));
        let grad = (&*u - fv) / tau + dt * phi1;
        if grad.norm() < 1e-14 {
            return;
        }
        let hess = DMatrix::identity(n, n) / tau + dt * DMatrix::from_diagonal(&phi2) * d;
        let step = hess
            .lu()
            .solve(&(-&grad))
            .expect("Newton system is positive definite");
        let e0 = energy(u);
        let mut t = 1.0;
        while energy(&(&*u + &step * t)) > e0 + 1e-4 * t * grad.dot(&step) && t > 1e-12 {
            t *= 0.5;
        }
        *u += &step * t;
        if step.amax() * t < 1e-15 {
            return;
        }
    }
}

/// Richardson extrapolation of two smoothed solutions assuming error linear in eps.
pub fn extrapolated_rof(f: &[f64], h: f64, tau: f64) -> Vec<f64> {
    let coarse = smoothed_rof(f, h, tau, 1e-3);
    let fine = smoothed_rof(f, h, tau, 1e-4);
    fine.iter()
        .zip(&coarse)
        .map(|(a, b)| (10.0 * a - b) / 9.0)
        .collect()
}

/// `(4 / h^2) sin^2(pi j / N)`.
pub fn closed_form_eigenvalue(j: usize, n: usize, h: f64) -> f64 {
    4.0 / (h * h) * (std::f64::consts::PI * j as f64 / n as f64).sin().powi(2)
}

/// Least-squares slope of `y` against `t`.
pub fn fitted_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let num: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let den: f64 = t.iter().map(|a| (a - tm).powi(2)).sum();
    num / den
}

pub fn step_data(x: f64) -> f64 {
    if x.abs() <= 2.0 {
        20.0
    } else {
        0.0
    }
}

/// Chambolle's semi-implicit projection iteration for the 1D ROF prox with
/// weight `tau`: `p <- (p + delta q) / (1 + delta |q|)`, `q = D(D^T p + f / tau)`
/// (sign arranged for `div = D^T`), `u = f + tau D^T p`.
pub fn chambolle_rof(f: &[f64], h: f64, tau: f64, iterations: usize) -> Vec<f64> {
    let n = f.len();
    let delta = h * h / 4.0;
    let mut p = vec![0.0; n];
    let mut w = vec![0.0; n];
    for _ in 0..iterations {
        // w = D^T p + f / tau
        for j in 0..n {
            w[j] = (p[(j + n - 1) % n] - p[j]) / h + f[j] / tau;
        }
        for j in 0..n {
            let q = -(w[(j + 1) % n] - w[j]) / h;
            p[j] = (p[j] + delta * q) / (1.0 + delta * q.abs());
        }
    }
    (0..n)
        .map(|j| f[j] + tau * (p[(j + n - 1) % n] - p[j]) / h)
        .collect()
}
