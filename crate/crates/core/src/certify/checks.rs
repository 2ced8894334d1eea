use nalgebra::{DMatrix, DVector};
use serde_json::json;

use super::{ConditionId, ConditionVerdict, Status};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{
    core_decompose, min_eig_on_subspace, psd_margin, range_of, sigma_min, spectral_norm, SymMatrix,
    RANK_TOL,
};
use crate::prox::{JacobianSet, SecondOrderDescriptor};
use crate::residual::{CompositeProblem, MatrixSet, StationaryTriple};
use crate::sampling;

/// Default threshold above which a constant counts as positive.
pub const TOL_POS: f64 = 1e-9;
/// Slack in the PSD test used while bisecting for `σ`.
const FEAS_SLACK: f64 = 1e-9;
/// Relative width at which the `σ` bisection stops.
const SIGMA_WIDTH: f64 = 1e-10;

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// `λ_min((∇²f + Q)|aff S)`.
pub fn check_ssosc(desc: &SecondOrderDescriptor, hess_f: &SymMatrix) -> Result<ConditionVerdict> {
    check_ssosc_with(desc, hess_f, TOL_POS)
}

pub fn check_ssosc_with(
    desc: &SecondOrderDescriptor,
    hess_f: &SymMatrix,
    tol_pos: f64,
) -> Result<ConditionVerdict> {
    check_dim(desc.q.dim(), hess_f.dim())?;
    let m = hess_f + &desc.q;
    match min_eig_on_subspace(&m, &desc.aff_s) {
        Ok(sigma) => Ok(ConditionVerdict::new(
            ConditionId::I,
            Status::certified(sigma > tol_pos),
            Some(sigma),
            json!({ "aff_s_dim": desc.aff_s.dim() }),
        )),
        Err(Error::VacuousSubspace) => Ok(ConditionVerdict::new(
            ConditionId::I,
            Status::CertifiedTrue,
            None,
            json!({ "aff_s_dim": 0, "note": "aff(S) = {0}; holds vacuously" }),
        )),
        Err(e) => Err(e),
    }
}

/// `DHD + τ⁻¹D(I − D) − σD²`.
pub fn jacobian_form(d: &SymMatrix, hess: &SymMatrix, tau: f64, sigma: f64) -> SymMatrix {
    let dd = d.as_matrix() * d.as_matrix();
    let m = d.sandwich(hess).as_matrix() + (d.as_matrix() - &dd) / tau - dd * sigma;
    SymMatrix::symmetrize(m)
}

/// Largest `σ` with `DHD + τ⁻¹D(I−D) ⪰ σD²` on `ℛ(D)`, found by bisection
/// with a Cholesky feasibility test and reported as the lower endpoint.
/// `+∞` when `D = 0`.
pub fn jacobian_sigma(d: &SymMatrix, hess: &SymMatrix, tau: f64) -> Result<f64> {
    check_dim(d.dim(), hess.dim())?;
    let range = range_of(d, RANK_TOL)?;
    if range.is_zero() {
        return Ok(f64::INFINITY);
    }
    let u = range.basis_matrix();
    let g = jacobian_form(d, hess, tau, 0.0).congruence(&u);
    let dd = SymMatrix::symmetrize(d.as_matrix() * d.as_matrix()).congruence(&u);
    let (ge, de) = (g.eigen(), dd.eigen());
    let (dmin, dmax) = (de.min(), de.max());
    let lo_ratio = if ge.min() >= 0.0 { ge.min() / dmax } else { ge.min() / dmin };
    let hi_ratio = if ge.max() >= 0.0 { ge.max() / dmin } else { ge.max() / dmax };
    let r = g.dim();
    let feasible = |sigma: f64| {
        let m = g.as_matrix() - dd.as_matrix() * sigma + DMatrix::identity(r, r) * FEAS_SLACK;
        m.cholesky().is_some()
    };
    let mut lo = lo_ratio - 1.0;
    let mut hi = hi_ratio + FEAS_SLACK / dmin + 1.0;
    for _ in 0..400 {
        if hi - lo <= SIGMA_WIDTH * lo.abs().max(hi.abs()).max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Settings for the `σ` search over the Clarke hull.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaSearch {
    /// Random convex combinations of `∂_B` elements to test.
    pub samples: usize,
    pub seed: u64,
    pub tol_pos: f64,
}

impl Default for SigmaSearch {
    fn default() -> Self {
        SigmaSearch {
            samples: 1000,
            seed: 0,
            tol_pos: TOL_POS,
        }
    }
}

/// Verdicts for the Jacobian condition over `∂_B` and over its convex hull.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianVerdicts {
    pub bd: ConditionVerdict,
    pub clarke: ConditionVerdict,
}

fn convex_combination(elements: &[SymMatrix], weights: &[f64]) -> SymMatrix {
    let n = elements[0].dim();
    let mut m = DMatrix::zeros(n, n);
    for (d, &w) in elements.iter().zip(weights) {
        m += d.as_matrix() * w;
    }
    SymMatrix::symmetrize(m)
}

/// Minimum `σ` over `∂_B` and over sampled convex combinations.
pub(crate) fn sigma_over_hull(
    set: &JacobianSet,
    hess: &SymMatrix,
    tau: f64,
    samples: usize,
    seed: u64,
) -> Result<(Vec<f64>, f64, Option<Vec<f64>>)> {
    let per_element = set
        .elements
        .iter()
        .map(|d| jacobian_sigma(d, hess, tau))
        .collect::<Result<Vec<f64>>>()?;
    let mut hull_min = per_element.iter().copied().fold(f64::INFINITY, f64::min);
    let mut witness = None;
    if set.len() > 1 {
        let mut rng = sampling::rng(seed);
        for _ in 0..samples {
            let w = sampling::simplex_weights(&mut rng, set.len());
            let s = jacobian_sigma(&convex_combination(&set.elements, &w), hess, tau)?;
            if s < hull_min {
                hull_min = s;
                witness = Some(w);
            }
        }
    }
    Ok((per_element, hull_min, witness))
}

/// The Jacobian condition at `z̄`: (vii) over `∂_B prox(z̄)`, (viii) over its
/// convex hull by sampling.
///
/// A hull verdict of "true" is only a probe here; it becomes a certificate
/// once the core-decomposition condition is certified (see `cross_check`).
pub fn check_jacobian_condition(
    p: &CompositeProblem,
    st: &StationaryTriple,
    search: &SigmaSearch,
) -> Result<JacobianVerdicts> {
    let set = match p.phi.bd_prox_set(p.tau, &st.z_bar) {
        Ok(s) => s,
        Err(e @ (Error::EnumerationUnavailable(_) | Error::TooManyPatterns { .. })) => {
            let detail = json!({ "reason": e.to_string() });
            return Ok(JacobianVerdicts {
                bd: ConditionVerdict::new(ConditionId::ViiBdGj, Status::NotApplicable, None, detail.clone()),
                clarke: ConditionVerdict::new(ConditionId::ViiiCdGj, Status::NotApplicable, None, detail),
            });
        }
        Err(e) => return Err(e),
    };
    let hess = p.f.hessian(&st.x_bar);
    let (per_element, hull_min, witness) =
        sigma_over_hull(&set, &hess, p.tau, search.samples, search.seed)?;
    let bd_min = per_element.iter().copied().fold(f64::INFINITY, f64::min);
    let bd_holds = bd_min > search.tol_pos;
    let hull_holds = hull_min > search.tol_pos;
    let bd_status = if set.exhaustive {
        Status::certified(bd_holds)
    } else {
        Status::probe(bd_holds)
    };
    let clarke_status = match (set.exhaustive, hull_holds) {
        (true, false) => Status::CertifiedFalse,
        (_, holds) => Status::probe(holds),
    };
    let per: Vec<Option<f64>> = per_element.iter().map(|&s| finite(s)).collect();
    Ok(JacobianVerdicts {
        bd: ConditionVerdict::new(
            ConditionId::ViiBdGj,
            bd_status,
            finite(bd_min),
            json!({ "per_element_sigma": per, "exhaustive": set.exhaustive }),
        ),
        clarke: ConditionVerdict::new(
            ConditionId::ViiiCdGj,
            clarke_status,
            finite(hull_min),
            json!({
                "sampled_combinations": if set.len() > 1 { search.samples } else { 0 },
                "witness_weights": witness,
                "exhaustive": set.exhaustive,
            }),
        ),
    })
}

/// Core-decomposition condition: every `D` has `ℛ(D) ⊆ aff S` and core
/// `A ⪰ Π_{ℛ(D)} Q Π_{ℛ(D)}`.
pub fn check_p1(
    d_set: &JacobianSet,
    desc: &SecondOrderDescriptor,
    tau: f64,
    rho: f64,
) -> Result<ConditionVerdict> {
    let mut rows = Vec::with_capacity(d_set.len());
    let mut holds = true;
    for (i, d) in d_set.elements.iter().enumerate() {
        check_dim(desc.q.dim(), d.dim())?;
        let cd = core_decompose(d, tau, rho)?;
        let in_aff = desc.aff_s.contains_subspace(&cd.range, 1e-9);
        let pqp = cd.range.projector().sandwich(&desc.q);
        let margin = psd_margin(&cd.core, &pqp)?;
        let ok = in_aff && margin >= -1e-9;
        holds &= ok;
        rows.push(json!({
            "index": i,
            "range_dim": cd.range.dim(),
            "range_in_aff_s": in_aff,
            "core_margin": finite(margin),
        }));
    }
    let status = if d_set.exhaustive {
        Status::certified(holds)
    } else {
        Status::probe(holds)
    };
    Ok(ConditionVerdict::new(
        ConditionId::P1,
        status,
        None,
        json!({ "elements": rows, "exhaustive": d_set.exhaustive }),
    ))
}

/// `Π_A (I + τQ)⁻¹ Π_A ∈ conv ∂_B prox(z̄)` with `A = aff S`.
pub fn check_p2(desc: &SecondOrderDescriptor, d_set: &JacobianSet, tau: f64) -> Result<ConditionVerdict> {
    let n = desc.q.dim();
    let inv = (&SymMatrix::identity(n) + &desc.q.scale(tau))
        .inverse()
        .ok_or_else(|| Error::Precondition("I + τQ is singular".into()))?;
    let target = desc.aff_s.projector().sandwich(&inv);
    for d in &d_set.elements {
        check_dim(n, d.dim())?;
    }
    let fit = hull_membership(&d_set.elements, &target);
    let status = if d_set.exhaustive {
        Status::certified(fit.member)
    } else {
        Status::probe(fit.member)
    };
    Ok(ConditionVerdict::new(
        ConditionId::P2,
        status,
        None,
        json!({
            "target": target.to_rows(),
            "weights": fit.weights,
            "residual": fit.residual,
            "exhaustive": d_set.exhaustive,
        }),
    ))
}

/// Result of a convex-hull membership test.
#[derive(Debug, Clone, PartialEq)]
pub struct HullFit {
    pub member: bool,
    pub weights: Vec<f64>,
    /// Frobenius distance between the best combination and the target.
    pub residual: f64,
}

/// Frobenius match tolerance for hull membership.
pub const HULL_TOL: f64 = 1e-8;
const HULL_ITERS: usize = 10_000;

/// Euclidean projection onto the probability simplex.
fn project_simplex(y: &DVector<f64>) -> DVector<f64> {
    let mut u: Vec<f64> = y.iter().copied().collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j as f64 + 1.0);
        if uj - t > 0.0 {
            theta = t;
        }
    }
    y.map(|v| (v - theta).max(0.0))
}

/// Tests `target ∈ conv(elements)` by accelerated projected gradient on the
/// simplex weights, after first checking for an exact match with an element.
pub fn hull_membership(elements: &[SymMatrix], target: &SymMatrix) -> HullFit {
    let k = elements.len();
    if k == 0 {
        return HullFit {
            member: false,
            weights: Vec::new(),
            residual: f64::INFINITY,
        };
    }
    for (i, d) in elements.iter().enumerate() {
        let r = (d.as_matrix() - target.as_matrix()).norm();
        if r <= HULL_TOL {
            let mut weights = vec![0.0; k];
            weights[i] = 1.0;
            return HullFit {
                member: true,
                weights,
                residual: r,
            };
        }
    }
    let combine = |w: &DVector<f64>| -> DMatrix<f64> {
        let mut m = -target.as_matrix().clone();
        for (d, &wi) in elements.iter().zip(w.iter()) {
            if wi != 0.0 {
                m += d.as_matrix() * wi;
            }
        }
        m
    };
    let gradient = |r: &DMatrix<f64>| DVector::from_fn(k, |i, _| elements[i].as_matrix().dot(r));
    // Lipschitz constant of the gradient: λ_max of the Gram matrix, by power iteration.
    let mut x = DVector::from_element(k, 1.0 / (k as f64).sqrt());
    let mut lip: f64 = 0.0;
    for _ in 0..100 {
        let mut m = DMatrix::zeros(target.dim(), target.dim());
        for (d, &xi) in elements.iter().zip(x.iter()) {
            m += d.as_matrix() * xi;
        }
        let y = gradient(&m);
        let norm = y.norm();
        if norm == 0.0 {
            break;
        }
        lip = norm;
        x = y / norm;
    }
    let step = 1.0 / (lip * 1.01).max(1e-12);

    let mut w = DVector::from_element(k, 1.0 / k as f64);
    let mut y = w.clone();
    let mut t: f64 = 1.0;
    let mut best = (combine(&w).norm(), w.clone());
    for _ in 0..HULL_ITERS {
        let r = combine(&y);
        let next = project_simplex(&(&y - gradient(&r) * step));
        let res = combine(&next).norm();
        if res < best.0 {
            best = (res, next.clone());
        }
        if res <= HULL_TOL {
            break;
        }
        // restart momentum when the residual stops decreasing
        let prev = combine(&w).norm();
        if res > prev {
            t = 1.0;
            y = w.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &next + (&next - &w) * ((t - 1.0) / t_next);
        w = next;
        t = t_next;
    }
    HullFit {
        member: best.0 <= HULL_TOL,
        weights: best.1.iter().copied().collect(),
        residual: best.0,
    }
}

/// Every `M` in the set is invertible: `σ_min(M) ≥ 10⁻¹⁰‖M‖` and `σ_min(M) > 0`.
pub fn bd_regularity(m_set: &MatrixSet) -> ConditionVerdict {
    let sigmas: Vec<f64> = m_set.elements.iter().map(sigma_min).collect();
    let holds = m_set
        .elements
        .iter()
        .zip(&sigmas)
        .all(|(m, &s)| s > 0.0 && s >= 1e-10 * spectral_norm(m));
    let status = if m_set.exhaustive {
        Status::certified(holds)
    } else {
        Status::probe(holds)
    };
    let min = sigmas.iter().copied().fold(f64::INFINITY, f64::min);
    ConditionVerdict::new(
        ConditionId::ViBd,
        status,
        finite(min),
        json!({ "sigma_min": sigmas, "exhaustive": m_set.exhaustive }),
    )
}
