//! Composite problems `min f(x) + φ(x)`, their natural residual and normal
//! map, and the generalized-derivative sets built from `∂_B prox`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::SymMatrix;
use crate::prox::{JacobianSet, ProxSpec};

/// Smooth part supplied by callbacks.
///
/// Implementations must return exact Hessians and be safe to call from
/// several threads at once.
pub trait SmoothFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> SymMatrix;
}

#[derive(Clone)]
pub enum SmoothPart {
    /// `f(x) = ½⟨x, Ax⟩ − ⟨b, x⟩`
    Quadratic { a: SymMatrix, b: DVector<f64> },
    Callbacks(Arc<dyn SmoothFunction>),
}

impl fmt::Debug for SmoothPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmoothPart::Quadratic { a, b } => f
                .debug_struct("Quadratic")
                .field("a", a)
                .field("b", &b.as_slice())
                .finish(),
            SmoothPart::Callbacks(cb) => write!(f, "Callbacks(dim = {})", cb.dim()),
        }
    }
}

impl SmoothPart {
    pub fn dim(&self) -> usize {
        match self {
            SmoothPart::Quadratic { a, .. } => a.dim(),
            SmoothPart::Callbacks(cb) => cb.dim(),
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            SmoothPart::Quadratic { a, b } => 0.5 * a.quad_form(x) - b.dot(x),
            SmoothPart::Callbacks(cb) => cb.value(x),
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            SmoothPart::Quadratic { a, b } => a.mul_vec(x) - b,
            SmoothPart::Callbacks(cb) => cb.gradient(x),
        }
    }

    pub fn hessian(&self, x: &DVector<f64>) -> SymMatrix {
        match self {
            SmoothPart::Quadratic { a, .. } => a.clone(),
            SmoothPart::Callbacks(cb) => cb.hessian(x),
        }
    }
}

/// `min f(x) + φ(x)` with prox parameter `τ`.
#[derive(Debug, Clone)]
pub struct CompositeProblem {
    pub f: SmoothPart,
    pub phi: ProxSpec,
    pub tau: f64,
}

/// Finite generalized-derivative set, one matrix per enumerated `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSet {
    pub elements: Vec<DMatrix<f64>>,
    pub exhaustive: bool,
}

impl CompositeProblem {
    pub fn new(f: SmoothPart, phi: ProxSpec, tau: f64) -> Result<Self> {
        phi.validate()?;
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
        }
        if tau * phi.rho() >= 1.0 {
            return Err(Error::InvalidArgument("tau * rho must be below 1".into()));
        }
        if let SmoothPart::Quadratic { a, b } = &f {
            check_dim(a.dim(), b.len())?;
        }
        if let Some(n) = phi.dim() {
            check_dim(n, f.dim())?;
        }
        Ok(CompositeProblem { f, phi, tau })
    }

    /// `f(x) = ½⟨x, Ax⟩ − ⟨b, x⟩`.
    pub fn quadratic(a: SymMatrix, b: DVector<f64>, phi: ProxSpec, tau: f64) -> Result<Self> {
        Self::new(SmoothPart::Quadratic { a, b }, phi, tau)
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    pub fn objective(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.f.value(x) + self.phi.value(x)?)
    }

    fn check(&self, x: &DVector<f64>) -> Result<()> {
        check_dim(self.dim(), x.len())
    }

    /// `F_nat(x) = x − prox(x − τ∇f(x))`.
    pub fn natural_residual(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x)?;
        let u = x - self.f.gradient(x) * self.tau;
        Ok(x - self.phi.prox(self.tau, &u)?)
    }

    /// `F_nor(z) = ∇f(prox z) + (z − prox z)/τ`.
    pub fn normal_map(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(z)?;
        let x = self.phi.prox(self.tau, z)?;
        Ok(self.f.gradient(&x) + (z - &x) / self.tau)
    }

    /// `∂_B prox(z)` together with `prox(z)`.
    pub fn jacobians_at(&self, z: &DVector<f64>) -> Result<(DVector<f64>, JacobianSet)> {
        self.check(z)?;
        let x = self.phi.prox(self.tau, z)?;
        Ok((x, self.phi.bd_prox_set(self.tau, z)?))
    }

    /// `{∇²f(prox z) D + (I − D)/τ : D ∈ ∂_B prox(z)}`.
    pub fn m_nor_set(&self, z: &DVector<f64>) -> Result<MatrixSet> {
        let (x, ds) = self.jacobians_at(z)?;
        let h = self.f.hessian(&x);
        let elements = ds.elements.iter().map(|d| self.m_nor_element(&h, d)).collect();
        Ok(MatrixSet {
            elements,
            exhaustive: ds.exhaustive,
        })
    }

    pub fn m_nor_element(&self, hess: &SymMatrix, d: &SymMatrix) -> DMatrix<f64> {
        let n = d.dim();
        hess * d + (DMatrix::identity(n, n) - d.as_matrix()) / self.tau
    }

    /// `{I − D(I − τ∇²f(x)) : D ∈ ∂_B prox(x − τ∇f(x))}`.
    pub fn m_nat_set(&self, x: &DVector<f64>) -> Result<MatrixSet> {
        self.check(x)?;
        let u = x - self.f.gradient(x) * self.tau;
        let ds = self.phi.bd_prox_set(self.tau, &u)?;
        let h = self.f.hessian(x);
        let elements = ds.elements.iter().map(|d| self.m_nat_element(&h, d)).collect();
        Ok(MatrixSet {
            elements,
            exhaustive: ds.exhaustive,
        })
    }

    pub fn m_nat_element(&self, hess: &SymMatrix, d: &SymMatrix) -> DMatrix<f64> {
        let n = d.dim();
        let inner = DMatrix::identity(n, n) - hess.as_matrix() * self.tau;
        DMatrix::identity(n, n) - d.as_matrix() * inner
    }
}

/// Stationarity tolerance for `‖x̄ − prox(z̄)‖`.
pub const STATIONARY_TOL: f64 = 1e-9;

/// `(x̄, v̄, z̄)` with `v̄ = −∇f(x̄)`, `z̄ = x̄ + τv̄`, `x̄ = prox(z̄)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryTriple {
    #[serde(with = "crate::serde_vec")]
    pub x_bar: DVector<f64>,
    #[serde(with = "crate::serde_vec")]
    pub v_bar: DVector<f64>,
    #[serde(with = "crate::serde_vec")]
    pub z_bar: DVector<f64>,
}

impl StationaryTriple {
    /// Builds the triple from a primal point, rejecting non-stationary `x`.
    pub fn from_x(p: &CompositeProblem, x: &DVector<f64>) -> Result<Self> {
        p.check(x)?;
        let v = -p.f.gradient(x);
        let z = x + &v * p.tau;
        let residual = (x - p.phi.prox(p.tau, &z)?).norm();
        if residual > STATIONARY_TOL * x.norm().max(1.0) {
            return Err(Error::NotStationary { residual });
        }
        Ok(StationaryTriple {
            x_bar: x.clone(),
            v_bar: v,
            z_bar: z,
        })
    }

    /// Builds the triple from a zero of the normal map.
    pub fn from_z(p: &CompositeProblem, z: &DVector<f64>) -> Result<Self> {
        let x = p.phi.prox(p.tau, z)?;
        Self::from_x(p, &x)
    }
}

/// `F_nat(x)`.
pub fn natural_residual(p: &CompositeProblem, x: &DVector<f64>) -> Result<DVector<f64>> {
    p.natural_residual(x)
}

/// `F_nor(z)`.
pub fn normal_map(p: &CompositeProblem, z: &DVector<f64>) -> Result<DVector<f64>> {
    p.normal_map(z)
}

pub fn m_nor_set(p: &CompositeProblem, z: &DVector<f64>) -> Result<MatrixSet> {
    p.m_nor_set(z)
}

pub fn m_nat_set(p: &CompositeProblem, x: &DVector<f64>) -> Result<MatrixSet> {
    p.m_nat_set(x)
}
