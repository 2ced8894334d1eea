#![allow(dead_code)]

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use ssncert_core::linalg::{lu_solve, SymMatrix};
use ssncert_core::prox::ProxSpec;
use ssncert_core::residual::CompositeProblem;
use ssncert_core::sampling::{self, SeededRng};

pub fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

/// Solves `min ½xᵀAx − bᵀx + w‖x‖₁` (with `A ≻ 0`) by trying every sign
/// pattern and keeping the one that satisfies the optimality conditions.
pub fn lasso_by_sign_enumeration(a: &SymMatrix, b: &DVector<f64>, w: f64) -> DVector<f64> {
    let n = b.len();
    for signs in (0..n).map(|_| [-1i8, 0, 1]).multi_cartesian_product() {
        let support: Vec<usize> = (0..n).filter(|&i| signs[i] != 0).collect();
        let mut x = DVector::zeros(n);
        if !support.is_empty() {
            let k = support.len();
            let a_ss = DMatrix::from_fn(k, k, |i, j| a.get(support[i], support[j]));
            let rhs = DVector::from_fn(k, |i, _| b[support[i]] - w * signs[support[i]] as f64);
            let Some(xs) = lu_solve(&a_ss, &rhs) else { continue };
            for (i, &s) in support.iter().enumerate() {
                x[s] = xs[i];
            }
        }
        let signs_ok = support.iter().all(|&i| x[i] * signs[i] as f64 > 0.0);
        let grad = b - a.mul_vec(&x);
        let kkt_ok = (0..n)
            .filter(|&i| signs[i] == 0)
            .all(|i| grad[i].abs() <= w * (1.0 + 1e-12));
        if signs_ok && kkt_ok {
            return x;
        }
    }
    panic!("no sign pattern satisfies the lasso optimality conditions");
}

pub fn spectrum(rng: &mut SeededRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// A random convex lasso instance `½xᵀAx − bᵀx + w‖x‖₁` with `A ≻ 0`.
pub fn random_lasso(rng: &mut SeededRng, n: usize) -> CompositeProblem {
    let eigs = spectrum(rng, n, 0.5, 4.0);
    let a = sampling::with_spectrum(rng, &eigs);
    let b = sampling::gaussian_vector(rng, n) * 2.0;
    let w = rng.random_range(0.3..1.5);
    let tau = rng.random_range(0.2..1.0);
    CompositeProblem::quadratic(a, b, ProxSpec::L1 { weight: w }, tau).unwrap()
}

/// A stationary point built backwards: pick `x̄` and `v̄ ∈ ∂φ(x̄)` first, then
/// set `b = Ax̄ + v̄` so that `−∇f(x̄) = v̄`. Some coordinates are degenerate
/// (`x̄ᵢ = 0` with `v̄ᵢ` on the boundary of the subdifferential).
pub fn random_stationary_instance(rng: &mut SeededRng, n: usize, orthant: bool) -> (CompositeProblem, DVector<f64>) {
    let mut eigs = spectrum(rng, n, 0.2, 3.0);
    if rng.random_bool(0.4) {
        let k = rng.random_range(0..n);
        eigs[k] = -rng.random_range(0.2..2.0);
    }
    let a = sampling::with_spectrum(rng, &eigs);
    let w = if orthant { 1.0 } else { rng.random_range(0.5..1.5) };
    let mut x = DVector::zeros(n);
    let mut vbar = DVector::zeros(n);
    for i in 0..n {
        match rng.random_range(0..3) {
            // active coordinate
            0 => {
                let mag = rng.random_range(0.3..2.0);
                if orthant {
                    x[i] = mag;
                } else {
                    let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    x[i] = s * mag;
                    vbar[i] = s * w;
                }
            }
            // strictly inactive
            1 => {
                vbar[i] = if orthant {
                    -rng.random_range(0.2..2.0)
                } else {
                    rng.random_range(-0.7..0.7) * w
                };
            }
            // degenerate
            _ => {
                if !orthant {
                    vbar[i] = if rng.random_bool(0.5) { w } else { -w };
                }
            }
        }
    }
    let b = a.mul_vec(&x) + &vbar;
    let phi = if orthant {
        ProxSpec::IndicatorOrthant { n }
    } else {
        ProxSpec::L1 { weight: w }
    };
    let tau = rng.random_range(0.2..1.5);
    (CompositeProblem::quadratic(a, b, phi, tau).unwrap(), x)
}

/// Random `D` with `0 ⪯ D ⪯ bound·I`, mixing exact 0/`bound` eigenvalues with interior ones.
pub fn random_admissible_d(rng: &mut SeededRng, n: usize, bound: f64) -> SymMatrix {
    let eigs: Vec<f64> = (0..n)
        .map(|_| match rng.random_range(0..4) {
            0 => 0.0,
            1 => bound,
            _ => rng.random_range(0.05..1.0) * bound,
        })
        .collect();
    sampling::with_spectrum(rng, &eigs)
}
