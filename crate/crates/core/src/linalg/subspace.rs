use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::sym::SymMatrix;
use crate::error::{check_dim, Error, Result};

/// Linear subspace of `R^n` held as an orthonormal basis.
///
/// An empty basis represents `{0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    n: usize,
    basis: Vec<DVector<f64>>,
}

impl Subspace {
    /// Orthonormalizes `vectors` by modified Gram-Schmidt with one
    /// reorthogonalization pass. A vector whose residual after deflation is at
    /// most `tol * max(1, ||v||)` is dropped.
    pub fn orthonormalize(n: usize, vectors: &[DVector<f64>], tol: f64) -> Result<Self> {
        if tol <= 0.0 {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        let mut basis: Vec<DVector<f64>> = Vec::new();
        for v in vectors {
            check_dim(n, v.len())?;
            let scale = v.norm().max(1.0);
            let mut r = v.clone();
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dot(&r);
                    r.axpy(-c, b, 1.0);
                }
            }
            let norm = r.norm();
            if norm > tol * scale {
                basis.push(r / norm);
            }
        }
        Ok(Subspace { n, basis })
    }

    pub fn full(n: usize) -> Self {
        let basis = (0..n).map(|i| unit(n, i)).collect();
        Subspace { n, basis }
    }

    pub fn zero(n: usize) -> Self {
        Subspace {
            n,
            basis: Vec::new(),
        }
    }

    /// Span of the given coordinate axes.
    pub fn coordinate(n: usize, axes: &[usize]) -> Self {
        let mut axes = axes.to_vec();
        axes.sort_unstable();
        axes.dedup();
        let basis = axes.into_iter().filter(|&i| i < n).map(|i| unit(n, i)).collect();
        Subspace { n, basis }
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_zero(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[DVector<f64>] {
        &self.basis
    }

    /// `n x k` matrix whose columns are the basis vectors.
    pub fn basis_matrix(&self) -> DMatrix<f64> {
        if self.basis.is_empty() {
            DMatrix::zeros(self.n, 0)
        } else {
            DMatrix::from_columns(&self.basis)
        }
    }

    pub fn projector(&self) -> SymMatrix {
        let b = self.basis_matrix();
        SymMatrix::symmetrize(&b * b.transpose())
    }

    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for b in &self.basis {
            out.axpy(b.dot(v), b, 1.0);
        }
        out
    }

    /// Distance from `v` to the subspace.
    pub fn residual(&self, v: &DVector<f64>) -> f64 {
        (v - self.project(v)).norm()
    }

    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        self.residual(v) <= tol * v.norm().max(1.0)
    }

    pub fn contains_subspace(&self, other: &Subspace, tol: f64) -> bool {
        other.basis.iter().all(|b| self.residual(b) <= tol)
    }

    pub fn complement(&self) -> Subspace {
        let mut vectors = self.basis.clone();
        vectors.extend((0..self.n).map(|i| unit(self.n, i)));
        let all = Subspace::orthonormalize(self.n, &vectors, 1e-10).expect("dimensions agree");
        Subspace {
            n: self.n,
            basis: all.basis[self.dim()..].to_vec(),
        }
    }

    pub fn sum(&self, other: &Subspace) -> Result<Subspace> {
        check_dim(self.n, other.n)?;
        let vectors: Vec<_> = self.basis.iter().chain(&other.basis).cloned().collect();
        Subspace::orthonormalize(self.n, &vectors, 1e-10)
    }

    pub fn intersect(&self, other: &Subspace) -> Result<Subspace> {
        check_dim(self.n, other.n)?;
        // (A ∩ B) = (A⊥ + B⊥)⊥
        Ok(self.complement().sum(&other.complement())?.complement())
    }
}

#[derive(Serialize, Deserialize)]
struct SubspaceRepr {
    n: usize,
    basis: Vec<Vec<f64>>,
}

impl Serialize for Subspace {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SubspaceRepr {
            n: self.n,
            basis: self.basis.iter().map(|b| b.as_slice().to_vec()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Subspace {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = SubspaceRepr::deserialize(d)?;
        let vectors: Vec<_> = repr.basis.iter().map(|b| DVector::from_vec(b.clone())).collect();
        Subspace::orthonormalize(repr.n, &vectors, 1e-10).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[i] = 1.0;
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn identity_case() {
        let s = Subspace::orthonormalize(2, &[v(&[1.0, 0.0]), v(&[0.0, 1.0])], 1e-12).unwrap();
        assert_eq!(s.projector(), SymMatrix::identity(2));
    }

    #[test]
    fn collinear_vectors_collapse() {
        let s = Subspace::orthonormalize(2, &[v(&[1.0, 1.0]), v(&[2.0, 2.0])], 1e-12).unwrap();
        assert_eq!(s.dim(), 1);
        let b = &s.basis()[0];
        let r = 0.5f64.sqrt();
        assert!((b - v(&[r, r])).norm() < 1e-15);
    }

    #[test]
    fn gram_schmidt_by_hand() {
        let s = Subspace::orthonormalize(3, &[v(&[1.0, 0.0, 0.0]), v(&[1.0, 1.0, 0.0])], 1e-12)
            .unwrap();
        assert_eq!(s.projector(), SymMatrix::from_diagonal(&[1.0, 1.0, 0.0]));
    }

    #[test]
    fn rejects_wrong_dimension() {
        let err = Subspace::orthonormalize(3, &[v(&[1.0, 0.0])], 1e-12).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 3, got: 2 });
    }

    #[test]
    fn complement_and_intersection() {
        let a = Subspace::coordinate(3, &[0, 1]);
        let c = a.complement();
        assert_eq!(c.dim(), 1);
        assert!(c.contains(&v(&[0.0, 0.0, 1.0]), 1e-12));
        let b = Subspace::coordinate(3, &[1, 2]);
        let i = a.intersect(&b).unwrap();
        assert_eq!(i.dim(), 1);
        assert!(i.contains(&v(&[0.0, 1.0, 0.0]), 1e-12));
    }
}
