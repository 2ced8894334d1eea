//! Catalog of nonsmooth terms with closed-form proximity operators.

pub mod bespoke;
mod descriptor;
mod jacobian;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use descriptor::SecondOrderDescriptor;
pub use jacobian::{JacobianSet, MAX_PATTERNS};

use crate::error::{check_dim, Error, Result};
use crate::linalg::SymMatrix;
use crate::variational::Polyhedron;

/// Relative slack for indicator membership when evaluating `φ`.
const INDICATOR_TOL: f64 = 1e-12;

/// A catalog member `φ`.
///
/// Serialized with a `kind` tag, e.g. `{"kind": "l1", "weight": 1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxSpec {
    /// `φ = 0`
    Zero,
    /// `φ(x) = w‖x‖₁`
    L1 { weight: f64 },
    /// Indicator of `R^n_+`.
    IndicatorOrthant { n: usize },
    /// Indicator of `K = {x ∈ R² : x1 ≥ |x2|}`.
    IndicatorAbsCone,
    /// `φ(x) = w Σ_b ‖x_b‖` over a partition of the coordinates.
    GroupL2 { weight: f64, blocks: Vec<Vec<usize>> },
    /// `φ = σ_C` for a polyhedron `C = conv(V) + cone(R)`.
    PolyhedralSupport(Polyhedron),
    /// Support function of the arc-segment set in `R³`.
    SupportArcSegment,
    /// Support function of `{x2 ≥ (2/3)|x1|^{3/2}}`.
    SupportSharpCusp,
}

/// A point of one of the published sequences approaching the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ExamplePoint {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    pub hessian: SymMatrix,
}

impl ProxSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ProxSpec::Zero => "zero",
            ProxSpec::L1 { .. } => "l1",
            ProxSpec::IndicatorOrthant { .. } => "indicator_orthant",
            ProxSpec::IndicatorAbsCone => "indicator_abs_cone",
            ProxSpec::GroupL2 { .. } => "group_l2",
            ProxSpec::PolyhedralSupport(_) => "polyhedral_support",
            ProxSpec::SupportArcSegment => "support_arc_segment",
            ProxSpec::SupportSharpCusp => "support_sharp_cusp",
        }
    }

    pub const KINDS: [&'static str; 8] = [
        "zero",
        "l1",
        "indicator_orthant",
        "indicator_abs_cone",
        "group_l2",
        "polyhedral_support",
        "support_arc_segment",
        "support_sharp_cusp",
    ];

    /// Fixed dimension, or `None` for kinds that apply in any dimension.
    pub fn dim(&self) -> Option<usize> {
        match self {
            ProxSpec::Zero | ProxSpec::L1 { .. } => None,
            ProxSpec::IndicatorOrthant { n } => Some(*n),
            ProxSpec::IndicatorAbsCone | ProxSpec::SupportSharpCusp => Some(2),
            ProxSpec::GroupL2 { blocks, .. } => Some(blocks.iter().map(Vec::len).sum()),
            ProxSpec::PolyhedralSupport(c) => Some(c.dim()),
            ProxSpec::SupportArcSegment => Some(3),
        }
    }

    /// Prox-regularity constant; every catalog member is convex.
    pub fn rho(&self) -> f64 {
        0.0
    }

    /// Checks parameters that serde cannot.
    pub fn validate(&self) -> Result<()> {
        match self {
            ProxSpec::L1 { weight } | ProxSpec::GroupL2 { weight, .. }
                if !(weight.is_finite() && *weight > 0.0) =>
            {
                Err(Error::InvalidArgument(format!("weight must be positive, got {weight}")))
            }
            ProxSpec::IndicatorOrthant { n: 0 } => {
                Err(Error::InvalidArgument("orthant dimension must be positive".into()))
            }
            ProxSpec::GroupL2 { blocks, .. } => {
                let n: usize = blocks.iter().map(Vec::len).sum();
                let mut seen = vec![false; n];
                for &i in blocks.iter().flatten() {
                    if i >= n || seen[i] {
                        return Err(Error::InvalidArgument(
                            "group blocks must partition 0..n".into(),
                        ));
                    }
                    seen[i] = true;
                }
                if blocks.iter().any(Vec::is_empty) || n == 0 {
                    return Err(Error::InvalidArgument("group blocks must be nonempty".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn check_point(&self, z: &DVector<f64>) -> Result<()> {
        if let Some(n) = self.dim() {
            check_dim(n, z.len())?;
        }
        if z.is_empty() {
            return Err(Error::InvalidArgument("empty vector".into()));
        }
        Ok(())
    }

    fn check_tau(&self, tau: f64) -> Result<()> {
        if !(tau.is_finite() && tau > 0.0) || tau * self.rho() >= 1.0 {
            return Err(Error::InvalidArgument(format!("invalid tau {tau}")));
        }
        Ok(())
    }

    /// `φ(x)`, possibly `+∞`.
    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.value_with_slack(x, INDICATOR_TOL)
    }

    /// `φ(x)` with indicator membership tested up to `rel_slack · max(1, ‖x‖)`.
    ///
    /// Difference quotients need `rel_slack = 0`: at step `t` a tolerance of
    /// order `ε` admits infeasible points whose linear term is `O(ε/t)`.
    pub(crate) fn value_with_slack(&self, x: &DVector<f64>, rel_slack: f64) -> Result<f64> {
        self.check_point(x)?;
        let slack = rel_slack * x.norm().max(1.0);
        let indicator = |inside: bool| if inside { 0.0 } else { f64::INFINITY };
        Ok(match self {
            ProxSpec::Zero => 0.0,
            ProxSpec::L1 { weight } => weight * x.lp_norm(1),
            ProxSpec::IndicatorOrthant { .. } => indicator(x.iter().all(|&xi| xi >= -slack)),
            ProxSpec::IndicatorAbsCone => indicator(x[0] >= x[1].abs() - slack),
            ProxSpec::GroupL2 { weight, blocks } => {
                weight * blocks.iter().map(|b| block_norm(x, b)).sum::<f64>()
            }
            ProxSpec::PolyhedralSupport(c) => c.support(x),
            ProxSpec::SupportArcSegment => bespoke::arc_support(x),
            ProxSpec::SupportSharpCusp => bespoke::cusp_support(x),
        })
    }

    /// `prox_{τφ}(z)`.
    pub fn prox(&self, tau: f64, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_point(z)?;
        self.check_tau(tau)?;
        Ok(match self {
            ProxSpec::Zero => z.clone(),
            ProxSpec::L1 { weight } => z.map(|zi| soft_threshold(zi, tau * weight)),
            ProxSpec::IndicatorOrthant { .. } => z.map(|zi| zi.max(0.0)),
            ProxSpec::IndicatorAbsCone => project_abs_cone(z),
            ProxSpec::GroupL2 { weight, blocks } => {
                let mut x = z.clone();
                for b in blocks {
                    let norm = block_norm(z, b);
                    let scale = if norm > tau * weight {
                        1.0 - tau * weight / norm
                    } else {
                        0.0
                    };
                    for &i in b {
                        x[i] = scale * z[i];
                    }
                }
                x
            }
            ProxSpec::PolyhedralSupport(c) => z - c.project(&(z / tau)) * tau,
            ProxSpec::SupportArcSegment => bespoke::arc_prox(z, tau),
            ProxSpec::SupportSharpCusp => bespoke::cusp_prox(z, tau),
        })
    }

    /// `v ∈ ∂φ(x)`, tested through `x = prox_φ(x + v)`.
    pub fn subgradient_contains(&self, x: &DVector<f64>, v: &DVector<f64>, tol: f64) -> Result<bool> {
        Ok(self.subgradient_residual(x, v)? <= tol)
    }

    pub fn subgradient_residual(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        check_dim(x.len(), v.len())?;
        Ok((x - self.prox(1.0, &(x + v))?).norm())
    }

    /// The published sequence `x_k → 0` with `v_k = ∇φ(x_k)` and `∇²φ(x_k)`.
    pub fn example_sequence(&self, k: u32) -> Result<ExamplePoint> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!("sequence index must be >= 2, got {k}")));
        }
        let (x, v, hessian) = match self {
            ProxSpec::SupportArcSegment => {
                let (x, v) = bespoke::arc_sequence(k);
                let h = bespoke::arc_hessian(&x);
                (x, v, h)
            }
            ProxSpec::SupportSharpCusp => {
                let (x, v) = bespoke::cusp_sequence(k);
                let h = bespoke::cusp_hessian(&x);
                (x, v, h)
            }
            other => {
                return Err(Error::Unsupported(format!(
                    "no example sequence for {}",
                    other.kind_name()
                )))
            }
        };
        Ok(ExamplePoint { x, v, hessian })
    }
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

pub(crate) fn block_norm(x: &DVector<f64>, block: &[usize]) -> f64 {
    block.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt()
}

fn project_abs_cone(z: &DVector<f64>) -> DVector<f64> {
    let (z1, z2) = (z[0], z[1]);
    if z1 >= z2.abs() {
        z.clone()
    } else if z1 <= -z2.abs() {
        DVector::zeros(2)
    } else if z2 >= z1.abs() {
        let s = 0.5 * (z1 + z2);
        DVector::from_vec(vec![s, s])
    } else {
        let s = 0.5 * (z1 - z2);
        DVector::from_vec(vec![s, -s])
    }
}

/// `K = {x1 ≥ |x2|}` as a polyhedron.
pub(crate) fn abs_cone_set() -> Polyhedron {
    Polyhedron::new(
        2,
        vec![DVector::zeros(2)],
        vec![DVector::from_vec(vec![1.0, 1.0]), DVector::from_vec(vec![1.0, -1.0])],
    )
    .expect("the cone is well formed")
}

pub(crate) fn orthant_set(n: usize) -> Result<Polyhedron> {
    let rays = (0..n).map(|i| crate::linalg::unit(n, i)).collect();
    Polyhedron::new(n, vec![DVector::zeros(n)], rays)
}

/// `prox_{τφ}(z)`.
pub fn prox_eval(spec: &ProxSpec, tau: f64, z: &DVector<f64>) -> Result<DVector<f64>> {
    spec.prox(tau, z)
}

/// Bouligand Jacobian elements of `prox_{τφ}` at `z`.
pub fn bd_prox_set(spec: &ProxSpec, tau: f64, z: &DVector<f64>) -> Result<JacobianSet> {
    spec.bd_prox_set(tau, z)
}

pub fn subgradient_contains(spec: &ProxSpec, x: &DVector<f64>, v: &DVector<f64>, tol: f64) -> Result<bool> {
    spec.subgradient_contains(x, v, tol)
}

pub fn second_order_descriptor(
    spec: &ProxSpec,
    x_bar: &DVector<f64>,
    v_bar: &DVector<f64>,
) -> Result<SecondOrderDescriptor> {
    spec.second_order_descriptor(x_bar, v_bar)
}

pub fn example_sequence(spec: &ProxSpec, k: u32) -> Result<ExamplePoint> {
    spec.example_sequence(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn prox_examples() {
        let l1 = ProxSpec::L1 { weight: 1.0 };
        assert_eq!(l1.prox(1.0, &v(&[2.5, -0.3])).unwrap(), v(&[1.5, 0.0]));
        let k = ProxSpec::IndicatorAbsCone;
        for tau in [0.1, 1.0, 7.0] {
            assert_eq!(k.prox(tau, &v(&[-2.0, 1.0])).unwrap(), v(&[0.0, 0.0]));
        }
        let o = ProxSpec::IndicatorOrthant { n: 2 };
        assert_eq!(o.prox(3.0, &v(&[-1.0, 3.0])).unwrap(), v(&[0.0, 3.0]));
    }

    #[test]
    fn abs_cone_formula_matches_generic_projection() {
        let k = abs_cone_set();
        for i in 0..50 {
            let t = i as f64 * 0.77;
            let z = v(&[2.0 * t.sin(), 1.5 * (1.3 * t).cos()]);
            let a = project_abs_cone(&z);
            let b = k.project(&z);
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn group_prox_shrinks_blocks() {
        let g = ProxSpec::GroupL2 {
            weight: 1.0,
            blocks: vec![vec![0, 1], vec![2]],
        };
        let x = g.prox(1.0, &v(&[3.0, 4.0, 0.5])).unwrap();
        assert!((x - v(&[2.4, 3.2, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn polyhedral_support_of_box_is_l1() {
        let c = Polyhedron::cube(2, -1.0, 1.0).unwrap();
        let p = ProxSpec::PolyhedralSupport(c);
        let l1 = ProxSpec::L1 { weight: 1.0 };
        for z in [v(&[2.5, -0.3]), v(&[-0.2, 0.9]), v(&[5.0, -5.0])] {
            let a = p.prox(0.7, &z).unwrap();
            let b = l1.prox(0.7, &z).unwrap();
            assert!((a - b).norm() < 1e-12);
        }
        assert_eq!(p.value(&v(&[1.0, -2.0])).unwrap(), 3.0);
    }

    #[test]
    fn subgradient_examples() {
        let l1 = ProxSpec::L1 { weight: 1.0 };
        assert!(l1.subgradient_contains(&v(&[2.0, 0.0]), &v(&[1.0, 0.5]), 1e-12).unwrap());
        assert!(!l1.subgradient_contains(&v(&[2.0, 0.0]), &v(&[2.0, 0.0]), 1e-12).unwrap());
        let o = ProxSpec::IndicatorOrthant { n: 2 };
        assert!(o.subgradient_contains(&v(&[0.0, 1.0]), &v(&[-3.0, 0.0]), 1e-12).unwrap());
    }

    #[test]
    fn validation() {
        assert!(ProxSpec::L1 { weight: -1.0 }.validate().is_err());
        let bad = ProxSpec::GroupL2 {
            weight: 1.0,
            blocks: vec![vec![0, 1], vec![1]],
        };
        assert!(bad.validate().is_err());
        assert!(ProxSpec::IndicatorOrthant { n: 0 }.validate().is_err());
    }

    #[test]
    fn dimension_and_tau_errors() {
        let k = ProxSpec::IndicatorAbsCone;
        assert!(matches!(k.prox(1.0, &v(&[1.0])), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(k.prox(0.0, &v(&[1.0, 0.0])), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn serde_tags() {
        let s = serde_json::to_string(&ProxSpec::L1 { weight: 2.0 }).unwrap();
        assert_eq!(s, r#"{"kind":"l1","weight":2.0}"#);
        let back: ProxSpec = serde_json::from_str(r#"{"kind":"indicator_abs_cone"}"#).unwrap();
        assert_eq!(back, ProxSpec::IndicatorAbsCone);
        let poly: ProxSpec =
            serde_json::from_str(r#"{"kind":"polyhedral_support","vertices":[[0,0],[1,0],[0,1]]}"#)
                .unwrap();
        assert_eq!(poly.dim(), Some(2));
        for k in ProxSpec::KINDS {
            assert!(!k.is_empty());
        }
    }

    #[test]
    fn example_sequence_rejects_other_kinds() {
        assert!(ProxSpec::Zero.example_sequence(3).is_err());
        assert!(ProxSpec::SupportSharpCusp.example_sequence(1).is_err());
        let p = ProxSpec::SupportSharpCusp.example_sequence(10).unwrap();
        assert!(ProxSpec::SupportSharpCusp
            .subgradient_contains(&p.x, &p.v, 1e-12)
            .unwrap());
    }
}
