//! Seeded random draws shared by probes and property suites.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::linalg::SymMatrix;

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    loop {
        let g = gaussian_vector(rng, n);
        let norm = g.norm();
        if norm > 1e-8 {
            return g / norm;
        }
    }
}

/// Uniform draw from the closed ball of the given radius around `center`.
pub fn ball_point<R: Rng + ?Sized>(rng: &mut R, center: &DVector<f64>, radius: f64) -> DVector<f64> {
    let n = center.len();
    let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
    center + unit_vector(rng, n) * r
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
pub fn orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `Q diag(eigs) Qᵀ` for a random orthogonal `Q`.
pub fn with_spectrum<R: Rng + ?Sized>(rng: &mut R, eigs: &[f64]) -> SymMatrix {
    let q = orthogonal(rng, eigs.len());
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(eigs));
    SymMatrix::symmetrize(&q * d * q.transpose())
}

/// Symmetric matrix with i.i.d. Gaussian upper triangle.
pub fn gaussian_symmetric<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SymMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    SymMatrix::symmetrize(&g + g.transpose())
}

/// Uniform weights on the probability simplex.
pub fn simplex_weights<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}
