//! Semismooth Newton on the normal map and the natural residual of
//! `min f(x) + φ(x)`, with a battery of numerical checks for the strong
//! second-order sufficient condition and the regularity conditions that are
//! equivalent to it.

pub mod certify;
pub mod error;
pub mod linalg;
pub mod prox;
pub mod residual;
pub mod sampling;
pub mod solver;
pub(crate) mod serde_vec;
pub mod variational;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};

pub use certify::{cross_check, CertificationReport, ConditionId, ConditionVerdict, Consensus, CrossCheckOptions, Status};
pub use linalg::{Subspace, SymMatrix};
pub use prox::{JacobianSet, ProxSpec, SecondOrderDescriptor};
pub use residual::{CompositeProblem, SmoothFunction, SmoothPart, StationaryTriple};
pub use solver::{solve_natural_residual, solve_normal_map, SolveTrace, SolverOptions};
