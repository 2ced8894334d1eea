//! Sampling probes. None of these can certify anything; they only look for
//! witnesses against the conditions.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::checks::{jacobian_form, sigma_over_hull};
use super::{ConditionId, ConditionVerdict, Status};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{sigma_min, spectral_norm, SymMatrix};
use crate::residual::{CompositeProblem, MatrixSet, StationaryTriple};
use crate::sampling;

/// Lower Lipschitz ratios below this count as a failure of strong metric regularity.
pub const SMR_FLOOR: f64 = 1e-6;
/// Pairs are drawn at radius `r·10^{-u·SCALE_DECADES}` with `u` uniform, so
/// that small neighborhoods are probed as often as large ones.
const SCALE_DECADES: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmrMap {
    /// `F_nat` around `x̄`.
    Nat,
    /// `F_nor` around `z̄`.
    Nor,
    /// The graph of `∇f + ∂φ`, parametrized by `z ↦ (prox z, F_nor(z))` around `z̄`.
    Subdiff,
}

impl SmrMap {
    pub fn condition(self) -> ConditionId {
        match self {
            SmrMap::Nat => ConditionId::XSmrNat,
            SmrMap::Nor => ConditionId::IvSmrNor,
            SmrMap::Subdiff => ConditionId::IiiSmrSubdiff,
        }
    }
}

fn multiscale_point<R: Rng + ?Sized>(rng: &mut R, center: &DVector<f64>, radius: f64, decades: f64) -> DVector<f64> {
    let scale = radius * 10f64.powf(-decades * rng.random::<f64>());
    sampling::ball_point(rng, center, scale)
}

/// Samples `pairs` point pairs near `center` and reports the smallest
/// observed ratio `‖F(y) − F(z)‖ / ‖y − z‖`.
pub fn smr_probe(
    map: SmrMap,
    p: &CompositeProblem,
    center: &DVector<f64>,
    radius: f64,
    pairs: usize,
    seed: u64,
) -> Result<ConditionVerdict> {
    check_dim(p.dim(), center.len())?;
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    if pairs < 1000 {
        return Err(Error::InvalidArgument(format!("need at least 1000 pairs, got {pairs}")));
    }
    // (domain point, image point)
    let graph = |u: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>)> {
        match map {
            SmrMap::Nat => Ok((u.clone(), p.natural_residual(u)?)),
            SmrMap::Nor => Ok((u.clone(), p.normal_map(u)?)),
            SmrMap::Subdiff => Ok((p.phi.prox(p.tau, u)?, p.normal_map(u)?)),
        }
    };
    let mut rng = sampling::rng(seed);
    let mut best = f64::INFINITY;
    let mut witness: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut used = 0usize;
    let floor = 1e-14 * center.norm().max(1.0);
    for _ in 0..pairs {
        let a = multiscale_point(&mut rng, center, radius, SCALE_DECADES);
        let b = multiscale_point(&mut rng, center, radius, SCALE_DECADES);
        let (xa, ya) = graph(&a)?;
        let (xb, yb) = graph(&b)?;
        let dx = (&xa - &xb).norm();
        if dx <= floor {
            continue;
        }
        used += 1;
        let ratio = (&ya - &yb).norm() / dx;
        if ratio < best {
            best = ratio;
            witness = Some((a, b));
        }
    }
    let holds = best >= SMR_FLOOR;
    let detail = json!({
        "map": map,
        "radius": radius,
        "pairs_used": used,
        "witness": witness.as_ref().map(|(a, b)| vec![a.as_slice().to_vec(), b.as_slice().to_vec()]),
    });
    Ok(ConditionVerdict::new(
        map.condition(),
        if used == 0 { Status::NotApplicable } else { Status::probe(holds) },
        best.is_finite().then_some(best),
        detail,
    ))
}

/// Largest tolerated round-off in a growth ratio, relative to `max(1, |ratio|)`.
const GROWTH_NOISE: f64 = 1e-6;

/// Quadratic growth on the `v = 0` slice:
/// `min 2(ψ(x) − ψ(x̄)) / ‖x − x̄‖²` over sampled `x` with finite `ψ(x)`.
pub fn growth_probe(
    p: &CompositeProblem,
    st: &StationaryTriple,
    radius: f64,
    samples: usize,
    seed: u64,
    tol_pos: f64,
) -> Result<ConditionVerdict> {
    let base = p.objective(&st.x_bar)?;
    let mut rng = sampling::rng(seed);
    let mut best = f64::INFINITY;
    let mut witness = None;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for _ in 0..samples {
        let x = multiscale_point(&mut rng, &st.x_bar, radius, 3.0);
        let d2 = (&x - &st.x_bar).norm_squared();
        let value = p.objective(&x)?;
        if d2 == 0.0 || !value.is_finite() {
            continue;
        }
        let ratio = 2.0 * (value - base) / d2;
        // Points too close to x̄ only measure cancellation error.
        let noise = 8.0 * f64::EPSILON * (value.abs() + base.abs()) / d2;
        if noise > GROWTH_NOISE * ratio.abs().max(1.0) {
            skipped += 1;
            continue;
        }
        used += 1;
        if ratio < best {
            best = ratio;
            witness = Some(x);
        }
    }
    let status = if used == 0 {
        Status::NotApplicable
    } else {
        Status::probe(best > tol_pos)
    };
    Ok(ConditionVerdict::new(
        ConditionId::IiGrowth,
        status,
        best.is_finite().then_some(best),
        json!({
            "radius": radius,
            "samples_used": used,
            "samples_below_roundoff": skipped,
            "witness": witness.map(|x| x.as_slice().to_vec()),
        }),
    ))
}

/// Re-runs the hull version of the Jacobian condition at `z̄` and at
/// `points` seeded points of the ball of radius `radius` around it.
pub fn neighborhood_probe(
    p: &CompositeProblem,
    st: &StationaryTriple,
    radius: f64,
    points: usize,
    samples_per_point: usize,
    seed: u64,
    tol_pos: f64,
) -> Result<ConditionVerdict> {
    let mut rng = sampling::rng(seed);
    let mut best = f64::INFINITY;
    let mut witness = None;
    let mut visited = 0usize;
    let mut skipped = 0usize;
    for k in 0..=points {
        let z = if k == 0 {
            st.z_bar.clone()
        } else {
            sampling::ball_point(&mut rng, &st.z_bar, radius)
        };
        let set = match p.phi.bd_prox_set(p.tau, &z) {
            Ok(s) => s,
            Err(Error::EnumerationUnavailable(_) | Error::TooManyPatterns { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let x = p.phi.prox(p.tau, &z)?;
        let hess = p.f.hessian(&x);
        let (_, hull_min, _) = sigma_over_hull(&set, &hess, p.tau, samples_per_point, seed ^ k as u64)?;
        visited += 1;
        if hull_min < best {
            best = hull_min;
            witness = Some(z);
        }
    }
    let status = if visited == 0 {
        Status::NotApplicable
    } else {
        Status::probe(best > tol_pos)
    };
    Ok(ConditionVerdict::new(
        ConditionId::IxNbhdGj,
        status,
        best.is_finite().then_some(best),
        json!({
            "radius": radius,
            "points_visited": visited,
            "points_skipped": skipped,
            "witness": witness.map(|z| z.as_slice().to_vec()),
        }),
    ))
}

/// Invertibility of sampled convex combinations of the `M_nor` elements.
pub fn clarke_invertibility_probe(m_set: &MatrixSet, samples: usize, seed: u64) -> ConditionVerdict {
    let relative = |m: &DMatrix<f64>| {
        let norm = spectral_norm(m);
        if norm == 0.0 { 0.0 } else { sigma_min(m) / norm }
    };
    let mut best = m_set.elements.iter().map(relative).fold(f64::INFINITY, f64::min);
    let mut rng = sampling::rng(seed);
    if m_set.elements.len() > 1 {
        for _ in 0..samples {
            let w = sampling::simplex_weights(&mut rng, m_set.elements.len());
            let mut m = DMatrix::zeros(m_set.elements[0].nrows(), m_set.elements[0].ncols());
            for (e, wi) in m_set.elements.iter().zip(&w) {
                m += e * *wi;
            }
            best = best.min(relative(&m));
        }
    }
    ConditionVerdict::new(
        ConditionId::VCd,
        Status::probe(best >= 1e-10),
        best.is_finite().then_some(best),
        json!({ "relative_sigma_min": best.is_finite().then_some(best) }),
    )
}

/// Perturbs `(D, B)` within Frobenius distance `delta` and checks
/// `D̃B̃D̃ + τ⁻¹D̃(I − D̃) ⪰ (σ/4)D̃²` on every sample.
///
/// `D̃` is kept admissible by clipping its spectrum to `[0, max(1, λ_max(D))]`,
/// a projection that cannot move it further from `D`.
pub fn perturbation_stability(
    d: &SymMatrix,
    b: &SymMatrix,
    tau: f64,
    sigma: f64,
    trials: usize,
    delta: f64,
    seed: u64,
) -> Result<bool> {
    check_dim(d.dim(), b.dim())?;
    if !(tau > 0.0) || !(delta >= 0.0) {
        return Err(Error::InvalidArgument("need tau > 0 and delta >= 0".into()));
    }
    let margin = jacobian_form(d, b, tau, sigma).min_eigenvalue();
    if margin < -1e-9 {
        return Err(Error::Precondition(format!(
            "D B D + D(I - D)/tau - sigma D^2 has eigenvalue {margin:e}"
        )));
    }
    if delta == 0.0 {
        return Ok(true);
    }
    let n = d.dim();
    let top = d.max_eigenvalue().max(1.0);
    let mut rng = sampling::rng(seed);
    let perturb = |m: &SymMatrix, rng: &mut sampling::SeededRng| {
        let e = sampling::gaussian_symmetric(rng, n);
        let scale = delta * rng.random::<f64>() / e.frobenius().max(1e-300);
        &m.clone() + &e.scale(scale)
    };
    for _ in 0..trials {
        let dt = perturb(d, &mut rng).map_spectrum(|l| l.clamp(0.0, top));
        let bt = perturb(b, &mut rng);
        if jacobian_form(&dt, &bt, tau, sigma / 4.0).min_eigenvalue() < -1e-9 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::ProxSpec;
    use crate::residual::{SmoothFunction, SmoothPart};
    use std::sync::Arc;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn cone_problem() -> CompositeProblem {
        CompositeProblem::quadratic(
            SymMatrix::from_diagonal(&[2.0, -1.0]),
            v(&[0.0, 0.0]),
            ProxSpec::IndicatorAbsCone,
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn cone_natural_residual_is_smr() {
        let p = cone_problem();
        let verdict = smr_probe(SmrMap::Nat, &p, &v(&[0.0, 0.0]), 0.5, 10_000, 7).unwrap();
        assert_eq!(verdict.status, Status::ProbeTrue);
        let s = verdict.sigma.unwrap();
        assert!((0.19..=0.26).contains(&s), "{s}");
    }

    #[test]
    fn identity_normal_map() {
        let p = CompositeProblem::quadratic(SymMatrix::identity(2), v(&[0.0, 0.0]), ProxSpec::Zero, 1.0)
            .unwrap();
        let verdict = smr_probe(SmrMap::Nor, &p, &v(&[0.0, 0.0]), 1.0, 1000, 1).unwrap();
        assert!((verdict.sigma.unwrap() - 1.0).abs() < 1e-12);
    }

    struct Quartic;

    impl SmoothFunction for Quartic {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &DVector<f64>) -> f64 {
            x[0].powi(4) / 4.0
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            v(&[x[0].powi(3)])
        }
        fn hessian(&self, x: &DVector<f64>) -> SymMatrix {
            SymMatrix::from_diagonal(&[3.0 * x[0] * x[0]])
        }
    }

    #[test]
    fn degenerate_quartic_fails_smr() {
        let p = CompositeProblem::new(SmoothPart::Callbacks(Arc::new(Quartic)), ProxSpec::Zero, 1.0).unwrap();
        let verdict = smr_probe(SmrMap::Nat, &p, &v(&[0.0]), 0.5, 1000, 3).unwrap();
        assert_eq!(verdict.status, Status::ProbeFalse);
        assert!(!verdict.detail["witness"].is_null());
    }

    #[test]
    fn smr_preconditions() {
        let p = cone_problem();
        assert!(smr_probe(SmrMap::Nat, &p, &v(&[0.0, 0.0]), 0.0, 1000, 0).is_err());
        assert!(smr_probe(SmrMap::Nat, &p, &v(&[0.0, 0.0]), 1.0, 10, 0).is_err());
    }

    #[test]
    fn lasso_growth() {
        let p = CompositeProblem::quadratic(
            SymMatrix::identity(2),
            v(&[3.0, 0.5]),
            ProxSpec::L1 { weight: 1.0 },
            1.0,
        )
        .unwrap();
        let st = StationaryTriple::from_x(&p, &v(&[2.0, 0.0])).unwrap();
        let verdict = growth_probe(&p, &st, 1e-2, 10_000, 2, 1e-9).unwrap();
        assert_eq!(verdict.status, Status::ProbeTrue);
        assert!(verdict.sigma.unwrap() >= 0.5);
    }

    #[test]
    fn growth_ignores_samples_lost_in_cancellation() {
        // ψ(x̄) ≈ −10⁴: a 1e-9 step changes ψ by far less than its round-off.
        let p = CompositeProblem::quadratic(SymMatrix::identity(1), v(&[150.0]), ProxSpec::L1 { weight: 1.0 }, 1.0)
            .unwrap();
        let st = StationaryTriple::from_x(&p, &v(&[149.0])).unwrap();
        let verdict = growth_probe(&p, &st, 1e-2, 10_000, 3, 1e-9).unwrap();
        assert_eq!(verdict.status, Status::ProbeTrue);
        assert!(verdict.sigma.unwrap() > 0.99, "{:?}", verdict.sigma);
        assert!(verdict.detail["samples_below_roundoff"].as_u64().unwrap() > 0);
    }

    #[test]
    fn perturbation_examples() {
        let id = SymMatrix::identity(2);
        assert!(perturbation_stability(&id, &id, 1.0, 1.0, 200, 1e-3, 1).unwrap());
        let d = SymMatrix::from_diagonal(&[1.0, 0.0]);
        let b = SymMatrix::from_diagonal(&[2.0, -5.0]);
        assert!(perturbation_stability(&d, &b, 1.0, 1.0, 200, 1e-4, 2).unwrap());
        assert!(perturbation_stability(&d, &b, 1.0, 1.0, 200, 0.0, 2).unwrap());
        let err = perturbation_stability(&id, &b, 1.0, 1.0, 10, 1e-4, 2).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn clarke_probe_detects_singular_combination() {
        // ½I + ½diag(−1, 1) is singular
        let set = MatrixSet {
            elements: vec![DMatrix::identity(2, 2), DMatrix::from_diagonal(&v(&[-1.0, 1.0]))],
            exhaustive: true,
        };
        let verdict = clarke_invertibility_probe(&set, 2000, 4);
        assert!(verdict.sigma.unwrap() < 0.05);
    }
}
