use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{abs_cone_set, bespoke, block_norm, ProxSpec};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::variational::Polyhedron;

/// Cap on enumerated activity patterns.
pub const MAX_PATTERNS: u64 = 1 << 16;

/// Relative tolerance for deciding that a point sits exactly on a kink.
const KINK_TOL: f64 = 1e-12;

/// Elements of `∂_B prox_{τφ}(z)`.
///
/// `exhaustive == false` marks a known subset of an enumeration the catalog
/// cannot complete; downstream checks then only produce probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianSet {
    pub elements: Vec<SymMatrix>,
    pub exhaustive: bool,
}

impl JacobianSet {
    fn exact(elements: Vec<SymMatrix>) -> Self {
        JacobianSet {
            elements,
            exhaustive: true,
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn is_singleton(&self) -> bool {
        self.exhaustive && self.elements.len() == 1
    }
}

fn on_kink(a: f64, b: f64) -> bool {
    (a - b).abs() <= KINK_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Every combination of per-coordinate choices, first coordinate slowest.
fn product<T: Clone>(choices: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    let count = choices
        .iter()
        .try_fold(1u64, |acc, c| acc.checked_mul(c.len() as u64))
        .unwrap_or(u64::MAX);
    if count > MAX_PATTERNS {
        return Err(Error::TooManyPatterns {
            count,
            limit: MAX_PATTERNS,
        });
    }
    if choices.is_empty() {
        return Ok(vec![Vec::new()]);
    }
    Ok(choices.iter().cloned().multi_cartesian_product().collect())
}

fn diagonal_patterns(choices: &[Vec<f64>]) -> Result<Vec<SymMatrix>> {
    Ok(product(choices)?
        .into_iter()
        .map(|d| SymMatrix::from_diagonal(&d))
        .collect())
}

/// `{Π_{span F} : F a face of the critical cone of C at u}`, the Jacobians of
/// the projection onto a polyhedron.
fn projection_jacobians(c: &Polyhedron, u: &DVector<f64>) -> Result<Vec<SymMatrix>> {
    let y = c.project(u);
    let critical = c.tangent_cone(&y)?.face_orthogonal_to(&(u - &y))?;
    let faces = critical.faces()?;
    if faces.len() as u64 > MAX_PATTERNS {
        return Err(Error::TooManyPatterns {
            count: faces.len() as u64,
            limit: MAX_PATTERNS,
        });
    }
    Ok(faces.iter().map(|f| f.hull().projector()).collect())
}

fn smooth_point(hessian: &SymMatrix, tau: f64) -> SymMatrix {
    let n = hessian.dim();
    (&SymMatrix::identity(n) + &hessian.scale(tau))
        .inverse()
        .expect("I + τH is positive definite for convex φ")
}

impl ProxSpec {
    /// Bouligand Jacobian elements of `prox_{τφ}` at `z`.
    pub fn bd_prox_set(&self, tau: f64, z: &DVector<f64>) -> Result<JacobianSet> {
        let x = self.prox(tau, z)?;
        let n = z.len();
        Ok(match self {
            ProxSpec::Zero => JacobianSet::exact(vec![SymMatrix::identity(n)]),
            ProxSpec::L1 { weight } => {
                let t = tau * weight;
                let choices: Vec<Vec<f64>> = z
                    .iter()
                    .map(|&zi| {
                        if on_kink(zi.abs(), t) {
                            vec![1.0, 0.0]
                        } else if zi.abs() > t {
                            vec![1.0]
                        } else {
                            vec![0.0]
                        }
                    })
                    .collect();
                JacobianSet::exact(diagonal_patterns(&choices)?)
            }
            ProxSpec::IndicatorOrthant { .. } => {
                let choices: Vec<Vec<f64>> = z
                    .iter()
                    .map(|&zi| {
                        if on_kink(zi, 0.0) {
                            vec![1.0, 0.0]
                        } else if zi > 0.0 {
                            vec![1.0]
                        } else {
                            vec![0.0]
                        }
                    })
                    .collect();
                JacobianSet::exact(diagonal_patterns(&choices)?)
            }
            ProxSpec::IndicatorAbsCone => JacobianSet::exact(projection_jacobians(&abs_cone_set(), z)?),
            ProxSpec::GroupL2 { weight, blocks } => {
                let t = tau * weight;
                let mut choices: Vec<Vec<DMatrix<f64>>> = Vec::new();
                for b in blocks {
                    let m = b.len();
                    let norm = block_norm(z, b);
                    let zb = DVector::from_iterator(m, b.iter().map(|&i| z[i]));
                    let opts = if on_kink(norm, t) {
                        let u = &zb / norm;
                        vec![&u * u.transpose(), DMatrix::zeros(m, m)]
                    } else if norm > t {
                        let u = &zb / norm;
                        let s = t / norm;
                        vec![DMatrix::identity(m, m) * (1.0 - s) + (&u * u.transpose()) * s]
                    } else {
                        vec![DMatrix::zeros(m, m)]
                    };
                    choices.push(opts);
                }
                let elements = product(&choices)?
                    .into_iter()
                    .map(|pattern| {
                        let mut d = DMatrix::zeros(n, n);
                        for (blk, db) in blocks.iter().zip(&pattern) {
                            for (a, &i) in blk.iter().enumerate() {
                                for (c, &j) in blk.iter().enumerate() {
                                    d[(i, j)] = db[(a, c)];
                                }
                            }
                        }
                        SymMatrix::symmetrize(d)
                    })
                    .collect();
                JacobianSet::exact(elements)
            }
            ProxSpec::PolyhedralSupport(c) => {
                let id = SymMatrix::identity(n);
                let elements = projection_jacobians(c, &(z / tau))?
                    .into_iter()
                    .map(|p| &id - &p)
                    .collect();
                JacobianSet::exact(elements)
            }
            ProxSpec::SupportArcSegment => {
                if bespoke::arc_in_smooth_region(&x) {
                    JacobianSet::exact(vec![smooth_point(&bespoke::arc_hessian(&x), tau)])
                } else if z.norm() <= 1e-14 {
                    // Limits along the published sequence, from the segment's
                    // normal region, and from the interior of C.
                    JacobianSet {
                        elements: vec![
                            SymMatrix::from_diagonal(&[0.0, 1.0, 1.0]),
                            SymMatrix::from_diagonal(&[1.0, 1.0, 0.0]),
                            SymMatrix::zeros(3),
                        ],
                        exhaustive: false,
                    }
                } else {
                    return Err(Error::EnumerationUnavailable(format!(
                        "support_arc_segment at z = {:?}",
                        z.as_slice()
                    )));
                }
            }
            ProxSpec::SupportSharpCusp => {
                let p = z / tau;
                let gap = p[1] - 2.0 / 3.0 * p[0].abs().powf(1.5);
                let scale = p.norm().max(1.0);
                if z.norm() <= 1e-14 {
                    // Limits along the published sequence (I), along boundary
                    // normals shrinking to the cusp (e2 e2ᵀ), and from the
                    // interior of C (0).
                    JacobianSet {
                        elements: vec![
                            SymMatrix::identity(2),
                            SymMatrix::from_diagonal(&[0.0, 1.0]),
                            SymMatrix::zeros(2),
                        ],
                        exhaustive: false,
                    }
                } else if gap > KINK_TOL * scale {
                    JacobianSet::exact(vec![SymMatrix::zeros(2)])
                } else if gap < -KINK_TOL * scale {
                    JacobianSet::exact(vec![smooth_point(&bespoke::cusp_hessian(&x), tau)])
                } else {
                    let nrm = bespoke::cusp_unit_normal(p[0]);
                    JacobianSet::exact(vec![SymMatrix::outer(&nrm), SymMatrix::zeros(2)])
                }
            }
        })
    }
}
