//! Seeded benchmark instances.

use ssncert_core::sampling::{self, SeededRng};
use ssncert_core::{CompositeProblem, DVector, ProxSpec, SymMatrix};

pub fn rng(seed: u64) -> SeededRng {
    sampling::rng(seed)
}

/// A well-conditioned lasso: eigenvalues spread over `[0.5, 4]`.
pub fn lasso(n: usize, seed: u64) -> CompositeProblem {
    let mut rng = rng(seed);
    let eigs: Vec<f64> = (0..n)
        .map(|i| 0.5 + 3.5 * i as f64 / (n.max(2) - 1) as f64)
        .collect();
    let a = sampling::with_spectrum(&mut rng, &eigs);
    let b = 2.0 * sampling::gaussian_vector(&mut rng, n);
    CompositeProblem::quadratic(a, b, ProxSpec::L1 { weight: 1.0 }, 0.5).expect("valid lasso")
}

/// A diagonal Jacobian with a mix of zero, unit and fractional entries.
pub fn mixed_jacobian(n: usize) -> SymMatrix {
    let diag: Vec<f64> = (0..n).map(|i| [0.0, 1.0, 0.5][i % 3]).collect();
    SymMatrix::from_diagonal(&diag)
}

pub fn point(n: usize, seed: u64) -> DVector<f64> {
    sampling::gaussian_vector(&mut rng(seed), n)
}
