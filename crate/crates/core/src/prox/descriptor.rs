use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{abs_cone_set, bespoke, block_norm, orthant_set, ProxSpec};
use crate::error::{Error, Result};
use crate::linalg::{unit, Subspace, SymMatrix};
use crate::variational::PolyhedralCone;

/// Membership tolerance for the subgradient precondition.
const SUBGRADIENT_TOL: f64 = 1e-9;
/// Relative tolerance for "on the boundary of the subdifferential".
const ACTIVE_TOL: f64 = 1e-9;

/// Second-order data of `φ` at `(x̄, v̄)`: the second subderivative is
/// `⟨h, Q h⟩ + ι_S(h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderDescriptor {
    pub q: SymMatrix,
    pub s_cone: PolyhedralCone,
    pub aff_s: Subspace,
    #[serde(with = "crate::serde_vec::option")]
    pub lambda_bar: Option<DVector<f64>>,
}

impl SecondOrderDescriptor {
    fn new(q: SymMatrix, s_cone: PolyhedralCone, lambda_bar: &DVector<f64>) -> Self {
        let aff_s = s_cone.hull().clone();
        SecondOrderDescriptor {
            q,
            s_cone,
            aff_s,
            lambda_bar: Some(lambda_bar.clone()),
        }
    }

    fn flat(n: usize, s_cone: PolyhedralCone, lambda_bar: &DVector<f64>) -> Self {
        Self::new(SymMatrix::zeros(n), s_cone, lambda_bar)
    }

    /// The second subderivative `⟨h, Qh⟩ + ι_S(h)` (`+∞` off the cone).
    pub fn evaluate(&self, h: &DVector<f64>, tol: f64) -> f64 {
        if self.s_cone.contains(h, tol) {
            self.q.quad_form(h)
        } else {
            f64::INFINITY
        }
    }
}

fn smooth_descriptor(hessian: SymMatrix, v: &DVector<f64>) -> SecondOrderDescriptor {
    let n = hessian.dim();
    SecondOrderDescriptor::new(hessian, PolyhedralCone::subspace(Subspace::full(n)), v)
}

impl ProxSpec {
    /// Second-order data at a subgradient pair `(x̄, v̄)`.
    ///
    /// All catalog members are support functions or indicators composed with
    /// the identity, so `λ̄ = v̄` and `S` is the normal cone of `∂φ(x̄)` at `v̄`
    /// (support functions) or the critical cone `T(x̄) ∩ v̄⊥` (indicators).
    pub fn second_order_descriptor(
        &self,
        x: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<SecondOrderDescriptor> {
        let residual = self.subgradient_residual(x, v)?;
        if residual > SUBGRADIENT_TOL * x.norm().max(v.norm()).max(1.0) {
            return Err(Error::NotSubgradient { residual });
        }
        let n = x.len();
        Ok(match self {
            ProxSpec::Zero => {
                SecondOrderDescriptor::flat(n, PolyhedralCone::subspace(Subspace::full(n)), v)
            }
            ProxSpec::L1 { weight } => {
                let mut free = Vec::new();
                let mut rays = Vec::new();
                for i in 0..n {
                    if x[i] != 0.0 {
                        free.push(i);
                    } else if v[i].abs() >= weight * (1.0 - ACTIVE_TOL) {
                        rays.push(unit(n, i) * v[i].signum());
                    }
                }
                let cone = PolyhedralCone::new(n, rays, Subspace::coordinate(n, &free))?;
                SecondOrderDescriptor::flat(n, cone, v)
            }
            ProxSpec::IndicatorOrthant { .. } => {
                let cone = orthant_set(n)?.tangent_cone(x)?.face_orthogonal_to(v)?;
                SecondOrderDescriptor::flat(n, cone, v)
            }
            ProxSpec::IndicatorAbsCone => {
                let cone = abs_cone_set().tangent_cone(x)?.face_orthogonal_to(v)?;
                SecondOrderDescriptor::flat(n, cone, v)
            }
            ProxSpec::GroupL2 { weight, blocks } => {
                let mut q = DMatrix::zeros(n, n);
                let mut free = Vec::new();
                let mut rays = Vec::new();
                for b in blocks {
                    let norm = block_norm(x, b);
                    if norm > 0.0 {
                        free.extend_from_slice(b);
                        let u: Vec<f64> = b.iter().map(|&i| x[i] / norm).collect();
                        for (a, &i) in b.iter().enumerate() {
                            for (c, &j) in b.iter().enumerate() {
                                let delta = if a == c { 1.0 } else { 0.0 };
                                q[(i, j)] = weight / norm * (delta - u[a] * u[c]);
                            }
                        }
                    } else {
                        let vnorm = block_norm(v, b);
                        if vnorm >= weight * (1.0 - ACTIVE_TOL) {
                            let mut r = DVector::zeros(n);
                            for &i in b {
                                r[i] = v[i] / vnorm;
                            }
                            rays.push(r);
                        }
                    }
                }
                let cone = PolyhedralCone::new(n, rays, Subspace::coordinate(n, &free))?;
                SecondOrderDescriptor::new(SymMatrix::symmetrize(q), cone, v)
            }
            ProxSpec::PolyhedralSupport(c) => {
                let face = c.exposed_by(x).to_polyhedron(c)?;
                SecondOrderDescriptor::flat(n, face.normal_cone(v)?, v)
            }
            ProxSpec::SupportArcSegment => {
                if bespoke::arc_in_smooth_region(x) {
                    smooth_descriptor(bespoke::arc_hessian(x), v)
                } else if x.norm() == 0.0 && v.norm() == 0.0 {
                    // N_C(0) = {(x1, x2, 0) : x1, x2 ≤ 0}
                    let cone = PolyhedralCone::generated(3, vec![-unit(3, 0), -unit(3, 1)])?;
                    SecondOrderDescriptor::flat(3, cone, v)
                } else {
                    return Err(Error::Unsupported(
                        "support_arc_segment descriptor outside the analysed points".into(),
                    ));
                }
            }
            ProxSpec::SupportSharpCusp => {
                if x[1] < 0.0 {
                    smooth_descriptor(bespoke::cusp_hessian(x), v)
                } else if x.norm() == 0.0 {
                    let gap = v[1] - 2.0 / 3.0 * v[0].abs().powf(1.5);
                    let cone = if v.norm() == 0.0 {
                        PolyhedralCone::generated(2, vec![-unit(2, 1)])?
                    } else if gap > ACTIVE_TOL * v.norm().max(1.0) {
                        PolyhedralCone::subspace(Subspace::zero(2))
                    } else {
                        PolyhedralCone::generated(2, vec![bespoke::cusp_unit_normal(v[0])])?
                    };
                    SecondOrderDescriptor::flat(2, cone, v)
                } else {
                    return Err(Error::Unsupported(
                        "support_sharp_cusp descriptor outside the analysed points".into(),
                    ));
                }
            }
        })
    }
}
