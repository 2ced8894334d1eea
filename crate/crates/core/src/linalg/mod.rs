//! Dense symmetric-matrix and subspace algebra.

mod jacobi;
mod subspace;
mod sym;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use jacobi::{jacobi_eigen, SymEigen};
pub use subspace::Subspace;
pub(crate) use subspace::unit;
pub use sym::{lu_solve, sigma_min, spectral_norm, SymMatrix, SYMMETRY_TOL};

use crate::error::{check_dim, Error, Result};

/// Default relative rank cutoff for [`range_of`].
pub const RANK_TOL: f64 = 1e-10;
/// Default tolerance for PSD comparisons.
pub const PSD_TOL: f64 = 1e-9;

/// Smallest eigenvalue of `m` compressed to `s`, i.e. `λ_min(Bᵀ M B)`.
///
/// Fails with [`Error::VacuousSubspace`] when `s = {0}`; callers treat that as
/// a condition holding with constant `+∞`.
pub fn min_eig_on_subspace(m: &SymMatrix, s: &Subspace) -> Result<f64> {
    check_dim(m.dim(), s.ambient_dim())?;
    if s.is_zero() {
        return Err(Error::VacuousSubspace);
    }
    let b = s.basis_matrix();
    Ok(m.congruence(&b).min_eigenvalue())
}

/// `λ_min(m1 − m2)`: nonnegative iff `m1 ⪰ m2`.
pub fn psd_margin(m1: &SymMatrix, m2: &SymMatrix) -> Result<f64> {
    check_dim(m1.dim(), m2.dim())?;
    Ok((m1 - m2).min_eigenvalue())
}

/// `m1 ⪰ m2` up to `tol`.
pub fn psd_order(m1: &SymMatrix, m2: &SymMatrix, tol: f64) -> Result<bool> {
    Ok(psd_margin(m1, m2)? >= -tol)
}

/// Span of the eigenvectors of a PSD matrix whose eigenvalues exceed
/// `tol * λ_max` (floored at `1e-12`).
pub fn range_of(m: &SymMatrix, tol: f64) -> Result<Subspace> {
    let e = m.eigen();
    if e.min() < -tol.max(PSD_TOL) {
        return Err(Error::NotPsd { min_eig: e.min() });
    }
    let cutoff = (tol * e.max()).max(1e-12);
    let vectors: Vec<_> = (0..m.dim())
        .filter(|&i| e.values[i] > cutoff)
        .map(|i| e.vectors.column(i).into_owned())
        .collect();
    Subspace::orthonormalize(m.dim(), &vectors, 1e-8)
}

/// `D = Π_R (I + τA)⁻¹ Π_R` with `ℛ(A) ⊆ R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreDecomposition {
    pub range: Subspace,
    pub core: SymMatrix,
    pub tau: f64,
}

impl CoreDecomposition {
    /// Rebuilds `Π_R (I + τA)⁻¹ Π_R` by an explicit inverse.
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.core.dim();
        let m = &SymMatrix::identity(n) + &self.core.scale(self.tau);
        let inv = m
            .inverse()
            .expect("I + τA is positive definite on the range and identity off it");
        let p = self.range.projector();
        p.sandwich(&inv)
    }
}

/// Writes `D` as `Π_R (I + τA)⁻¹ Π_R` with `R = ℛ(D)` and
/// `A = τ⁻¹ U (Λ₁⁻¹ − I) Uᵀ`, where `(U, Λ₁)` are the positive eigenpairs.
///
/// Requires `0 ⪯ D ⪯ (1 − τρ)⁻¹ I` within `1e-10`.
pub fn core_decompose(d: &SymMatrix, tau: f64, rho: f64) -> Result<CoreDecomposition> {
    if tau <= 0.0 || tau * rho >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "need tau > 0 and tau*rho < 1 (tau = {tau}, rho = {rho})"
        )));
    }
    let n = d.dim();
    let e = d.eigen();
    let bound = 1.0 / (1.0 - tau * rho);
    if e.min() < -1e-10 {
        return Err(Error::NotPsd { min_eig: e.min() });
    }
    if e.max() > bound + 1e-10 {
        return Err(Error::OutsideBand {
            eigenvalue: e.max(),
            bound,
        });
    }
    let cutoff = (RANK_TOL * e.max()).max(1e-12);
    let mut a = DMatrix::zeros(n, n);
    let mut vectors = Vec::new();
    for i in 0..n {
        let lambda = e.values[i];
        if lambda > cutoff {
            let u = e.vectors.column(i);
            a += (u * u.transpose()) * ((1.0 / lambda - 1.0) / tau);
            vectors.push(u.into_owned());
        }
    }
    Ok(CoreDecomposition {
        range: Subspace::orthonormalize(n, &vectors, 1e-8)?,
        core: SymMatrix::symmetrize(a),
        tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn sym(rows: &[&[f64]]) -> SymMatrix {
        SymMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn min_eig_examples() {
        let s12 = Subspace::coordinate(3, &[0, 1]);
        assert_eq!(min_eig_on_subspace(&SymMatrix::identity(3), &s12).unwrap(), 1.0);

        let m = sym(&[&[2.0, 2.0], &[2.0, 1.0]]);
        let got = min_eig_on_subspace(&m, &Subspace::full(2)).unwrap();
        assert_abs_diff_eq!(got, (3.0 - 17f64.sqrt()) / 2.0, epsilon = 1e-14);

        let m = SymMatrix::from_diagonal(&[2.0, -1.0]);
        assert_eq!(min_eig_on_subspace(&m, &Subspace::coordinate(2, &[0])).unwrap(), 2.0);
    }

    #[test]
    fn min_eig_vacuous() {
        let err = min_eig_on_subspace(&SymMatrix::identity(2), &Subspace::zero(2));
        assert_eq!(err, Err(Error::VacuousSubspace));
    }

    #[test]
    fn psd_order_examples() {
        let i = SymMatrix::identity(2);
        assert!(psd_order(&i, &SymMatrix::zeros(2), PSD_TOL).unwrap());
        let a = SymMatrix::from_diagonal(&[1.0, 0.0]);
        let b = SymMatrix::from_diagonal(&[0.0, 1.0]);
        assert!(!psd_order(&a, &b, PSD_TOL).unwrap());
    }

    #[test]
    fn projected_inverse_ordering_instance() {
        // L = span{e1}, B = [[0,1],[1,0]]: (I+B) is singular here, so shift
        // B slightly to keep I+B ≻ 0 as the ordering requires.
        let b = sym(&[&[0.0, 0.9], &[0.9, 0.0]]);
        let l = Subspace::coordinate(2, &[0]);
        let p = l.projector();
        let inner = (&SymMatrix::identity(2) + &p.sandwich(&b)).inverse().unwrap();
        let lhs = p.sandwich(&inner);
        assert_eq!(lhs, SymMatrix::from_diagonal(&[1.0, 0.0]));
        let full = (&SymMatrix::identity(2) + &b).inverse().unwrap();
        assert!(psd_order(&full, &lhs, PSD_TOL).unwrap());
    }

    #[test]
    fn range_examples() {
        let r = range_of(&SymMatrix::from_diagonal(&[1.0, 0.0, 1.0]), RANK_TOL).unwrap();
        assert_eq!(r.projector(), SymMatrix::from_diagonal(&[1.0, 0.0, 1.0]));
        assert!(range_of(&SymMatrix::zeros(3), RANK_TOL).unwrap().is_zero());
        let v = DVector::from_vec(vec![1.0, 1.0]) / 2f64.sqrt();
        let r = range_of(&SymMatrix::outer(&v), RANK_TOL).unwrap();
        assert_eq!(r.dim(), 1);
        assert!(r.contains(&DVector::from_vec(vec![1.0, 1.0]), 1e-12));
    }

    #[test]
    fn range_rejects_indefinite() {
        let m = SymMatrix::from_diagonal(&[1.0, -0.5]);
        assert!(matches!(range_of(&m, RANK_TOL), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn core_examples() {
        let c = core_decompose(&SymMatrix::identity(3), 1.0, 0.0).unwrap();
        assert_eq!(c.range.dim(), 3);
        assert!(c.core.frobenius() < 1e-15);

        let c = core_decompose(&SymMatrix::from_diagonal(&[1.0, 0.0]), 1.0, 0.0).unwrap();
        assert_eq!(c.range.projector(), SymMatrix::from_diagonal(&[1.0, 0.0]));
        assert!(c.core.frobenius() < 1e-15);

        let c = core_decompose(&SymMatrix::from_diagonal(&[0.5, 0.0]), 1.0, 0.0).unwrap();
        assert!((c.core.as_matrix() - SymMatrix::from_diagonal(&[1.0, 0.0]).as_matrix()).norm() < 1e-14);
        let back = c.reconstruct();
        assert!((back.as_matrix() - SymMatrix::from_diagonal(&[0.5, 0.0]).as_matrix()).norm() < 1e-14);
    }

    #[test]
    fn core_rejects_outside_band() {
        let err = core_decompose(&SymMatrix::from_diagonal(&[1.5, 0.0]), 1.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::OutsideBand { .. }));
        let err = core_decompose(&SymMatrix::from_diagonal(&[-0.1, 0.0]), 1.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::NotPsd { .. }));
        // a positive ρ widens the band
        assert!(core_decompose(&SymMatrix::from_diagonal(&[1.5, 0.0]), 1.0, 0.5).is_ok());
    }
}
