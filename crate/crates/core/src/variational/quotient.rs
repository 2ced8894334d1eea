use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Subspace;
use crate::prox::{bespoke, ProxSpec};
use crate::residual::SmoothFunction;
use crate::sampling;

/// Quotient values above this are treated as blowing up.
pub const DIVERGENCE_CAP: f64 = 1e6;
/// Number of trailing grid points that form the liminf proxy.
const TAIL: usize = 5;
/// A grid point is kept only if its estimated round-off is below this
/// fraction of `max(1, |value|)`.
const RELIABLE: f64 = 1e-4;

/// One evaluation of `[φ(x+th) − φ(x) − t⟨v,h⟩] / (t²/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientSample {
    pub t: f64,
    #[serde(with = "crate::serde_vec")]
    pub h_used: DVector<f64>,
    pub value: f64,
}

pub fn second_diff_quotient(
    phi: &ProxSpec,
    x: &DVector<f64>,
    v: &DVector<f64>,
    h: &DVector<f64>,
    t: f64,
) -> Result<QuotientSample> {
    Ok(quotient_with_noise(phi, x, v, h, t)?.0)
}

/// The quotient together with a bound on its floating-point error.
fn quotient_with_noise(
    phi: &ProxSpec,
    x: &DVector<f64>,
    v: &DVector<f64>,
    h: &DVector<f64>,
    t: f64,
) -> Result<(QuotientSample, f64)> {
    check_dim(x.len(), v.len())?;
    check_dim(x.len(), h.len())?;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {t}")));
    }
    let base = phi.value(x)?;
    if !base.is_finite() {
        return Err(Error::InfiniteValue);
    }
    let moved = phi.value_with_slack(&(x + h * t), 0.0)?;
    let linear = t * v.dot(h);
    let half_t2 = 0.5 * t * t;
    let value = if moved.is_finite() {
        (moved - base - linear) / half_t2
    } else {
        f64::INFINITY
    };
    let noise = 4.0 * f64::EPSILON * (base.abs() + moved.abs() + linear.abs() + v.norm() * x.norm())
        / half_t2;
    Ok((
        QuotientSample {
            t,
            h_used: h.clone(),
            value,
        },
        noise,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct D2Estimate {
    /// Liminf proxy; `+∞` when the quotients diverge.
    pub estimate: f64,
    pub diverging: bool,
}

/// `10^{-k/2}` for `k = 2..=16`, i.e. `1e-1` down to `1e-8`.
pub fn default_t_grid() -> Vec<f64> {
    (2..=16).map(|k| 10f64.powf(-(k as f64) / 2.0)).collect()
}

/// Finite stand-in for `liminf_{t↓0, h̃→h} Δ²_t φ(x|v)(h̃)`.
///
/// At each `t` the quotient is minimized over `h` itself and
/// `h_perturbations` random `h̃` with `‖h̃ − h‖ ≤ 0.1 t`. Grid points whose
/// round-off would swamp the value are dropped; the estimate is the minimum
/// over the last five remaining points. The quotients diverge when those
/// points are nondecreasing and the last one exceeds [`DIVERGENCE_CAP`].
pub fn estimate_d2(
    phi: &ProxSpec,
    x: &DVector<f64>,
    v: &DVector<f64>,
    h: &DVector<f64>,
    t_grid: &[f64],
    h_perturbations: usize,
    seed: u64,
) -> Result<D2Estimate> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[1] < w[0])) || t_grid[0] <= 0.0 {
        return Err(Error::InvalidArgument("t grid must be positive and strictly decreasing".into()));
    }
    let mut rng = sampling::rng(seed);
    let mut values = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let (first, noise) = quotient_with_noise(phi, x, v, h, t)?;
        let mut best = first.value;
        let mut best_noise = noise;
        for _ in 0..h_perturbations {
            let ht = sampling::ball_point(&mut rng, h, 0.1 * t);
            let (s, n) = quotient_with_noise(phi, x, v, &ht, t)?;
            if s.value < best {
                best = s.value;
                best_noise = n;
            }
        }
        if best_noise <= RELIABLE * best.abs().max(1.0) {
            values.push(best);
        }
    }
    if values.is_empty() {
        return Err(Error::Precondition(
            "no grid step is large enough to beat round-off".into(),
        ));
    }
    let tail = &values[values.len().saturating_sub(TAIL)..];
    let last = *tail.last().expect("tail is nonempty");
    let diverging = tail.windows(2).all(|w| w[1] >= w[0]) && last > DIVERGENCE_CAP;
    let estimate = if diverging {
        f64::INFINITY
    } else {
        tail.iter().copied().fold(f64::INFINITY, f64::min)
    };
    Ok(D2Estimate { estimate, diverging })
}

/// The two non-polyhedral sets whose second-order tangent sets are probed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleSet {
    /// The set whose support function is [`ProxSpec::SupportArcSegment`].
    ArcSegment,
    /// `{y : y₂ ≥ (2/3)|y₁|^{3/2}}`, the set behind [`ProxSpec::SupportSharpCusp`].
    SharpCusp,
}

impl ExampleSet {
    pub fn dim(self) -> usize {
        match self {
            ExampleSet::ArcSegment => 3,
            ExampleSet::SharpCusp => 2,
        }
    }

    pub fn distance(self, p: &DVector<f64>) -> f64 {
        match self {
            ExampleSet::ArcSegment => (p - bespoke::arc_project(p)).norm(),
            ExampleSet::SharpCusp => bespoke::cusp_distance(p),
        }
    }
}

/// Slack allowed in the second-order tangent condition, as a multiple of `t²`.
const TANGENT_SLACK: f64 = 1e-3;
/// Relative first-order miss tolerated by the tangency check.
const TANGENT_TOL: f64 = 1e-3;
/// Log–log slope of `t ↦ min‖w‖` beyond which the probe reports `+∞`.
const BLOWUP_SLOPE: f64 = 0.25;

/// `10^{-k/4}` for `k = 4..=20`, i.e. `1e-1` down to `1e-5`.
pub fn default_path_grid() -> Vec<f64> {
    (4..=20).map(|k| 10f64.powf(-(k as f64) / 4.0)).collect()
}

/// Estimate of `dist(0, T²_C(λ, p))` for the outer second-order tangent set.
///
/// For each `t` the smallest `‖w‖` with `dist(λ + tp + ½t²w, C) ≤ 10⁻³t²` is
/// `(2/t²)·max(0, dist(λ + tp, C) − 10⁻³t²)` because `C` is convex, so no inner
/// search is needed. The set is reported empty (`+∞`) when these values
/// exceed [`DIVERGENCE_CAP`] or keep growing like a power of `1/t` over the
/// finest five usable steps.
pub fn second_tangent_distance(
    set: ExampleSet,
    lambda: &DVector<f64>,
    p: &DVector<f64>,
    path_grid: &[f64],
) -> Result<f64> {
    check_dim(set.dim(), lambda.len())?;
    check_dim(set.dim(), p.len())?;
    if path_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidArgument("path grid must be positive".into()));
    }
    let scale = lambda.norm().max(1.0);
    let d0 = set.distance(lambda);
    if d0 > 1e-9 * scale {
        return Err(Error::NotInSet { distance: d0 });
    }
    let pn = p.norm();
    if pn > 0.0 {
        let t = 1e-6;
        let ratio = set.distance(&(lambda + p * t)) / (t * pn);
        if ratio > TANGENT_TOL {
            return Err(Error::NotTangent { ratio });
        }
    }
    let mut grid: Vec<f64> = path_grid.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    let mut ts = Vec::new();
    let mut ws = Vec::new();
    for t in grid {
        let y = lambda + p * t;
        // distances are accurate to a few ulps of ‖y‖
        if 8.0 * f64::EPSILON * y.norm().max(1.0) > 1e-3 * TANGENT_SLACK * t * t {
            continue;
        }
        let w = 2.0 / (t * t) * (set.distance(&y) - TANGENT_SLACK * t * t).max(0.0);
        ts.push(t);
        ws.push(w);
    }
    let Some(&last) = ws.last() else {
        return Err(Error::InvalidArgument("no usable step in the path grid".into()));
    };
    if last > DIVERGENCE_CAP {
        return Ok(f64::INFINITY);
    }
    let k = ws.len().saturating_sub(TAIL);
    let (tail_t, tail_w) = (&ts[k..], &ws[k..]);
    if tail_w.len() >= 2 && tail_w.windows(2).all(|w| w[1] > w[0]) && tail_w[0] > 0.0 {
        let slope = (tail_w[tail_w.len() - 1] / tail_w[0]).ln()
            / (tail_t[0] / tail_t[tail_t.len() - 1]).ln();
        if slope >= BLOWUP_SLOPE {
            return Ok(f64::INFINITY);
        }
    }
    Ok(last)
}

/// Largest entrywise gap between `hessian(x)` and a central difference of
/// `gradient`, relative to `max(1, ‖hessian(x)‖_F)`.
pub fn hessian_fd_error(f: &dyn SmoothFunction, x: &DVector<f64>) -> Result<f64> {
    let n = f.dim();
    check_dim(n, x.len())?;
    let hess = f.hessian(x);
    check_dim(n, hess.dim())?;
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let step = 1e-5 * x[j].abs().max(1.0);
        let mut up = x.clone();
        up[j] += step;
        let mut down = x.clone();
        down[j] -= step;
        let col = (f.gradient(&up) - f.gradient(&down)) / (2.0 * step);
        for i in 0..n {
            worst = worst.max((col[i] - hess.get(i, j)).abs());
        }
    }
    Ok(worst / hess.frobenius().max(1.0))
}

/// Rejects callback Hessians that disagree with their gradients.
pub fn validate_hessian(f: &dyn SmoothFunction, x: &DVector<f64>, tol: f64) -> Result<()> {
    let err = hessian_fd_error(f, x)?;
    if err > tol {
        return Err(Error::Precondition(format!(
            "hessian callback differs from finite differences by {err:.3e}"
        )));
    }
    Ok(())
}

/// Gaussian direction projected onto `s`.
pub fn random_direction_in<R: Rng + ?Sized>(rng: &mut R, s: &Subspace) -> DVector<f64> {
    s.project(&sampling::gaussian_vector(rng, s.ambient_dim()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn orthant_quotients() {
        let phi = ProxSpec::IndicatorOrthant { n: 2 };
        let z = v(&[0.0, 0.0]);
        for t in [1.0, 1e-3, 1e-7] {
            assert_eq!(second_diff_quotient(&phi, &z, &z, &v(&[1.0, 1.0]), t).unwrap().value, 0.0);
            assert_eq!(
                second_diff_quotient(&phi, &z, &z, &v(&[-1.0, 0.0]), t).unwrap().value,
                f64::INFINITY
            );
        }
    }

    #[test]
    fn tiny_infeasible_steps_are_not_tolerated() {
        // x2 + t·h2 = −1e-14 would pass a 1e-12 membership slack and give a
        // quotient of −2e-4/t².
        let phi = ProxSpec::IndicatorOrthant { n: 2 };
        let s = second_diff_quotient(&phi, &v(&[1.0, 0.0]), &v(&[0.0, -1.0]), &v(&[0.0, -1e-8]), 1e-6)
            .unwrap();
        assert_eq!(s.value, f64::INFINITY);
        let e = estimate_d2(&phi, &v(&[1.0, 0.0]), &v(&[0.0, -1.0]), &v(&[1.0, 0.0]), &default_t_grid(), 30, 2)
            .unwrap();
        assert!(e.estimate.abs() < 1e-9, "{e:?}");
    }

    #[test]
    fn cusp_downward_quotient_is_zero() {
        let z = v(&[0.0, 0.0]);
        let s = second_diff_quotient(&ProxSpec::SupportSharpCusp, &z, &z, &v(&[0.0, -1.0]), 0.1)
            .unwrap();
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn infinite_base_value_is_an_error() {
        let phi = ProxSpec::IndicatorOrthant { n: 1 };
        let err = second_diff_quotient(&phi, &v(&[-1.0]), &v(&[0.0]), &v(&[1.0]), 0.1).unwrap_err();
        assert!(matches!(err, Error::InfiniteValue));
    }

    #[test]
    fn estimates_match_descriptors() {
        let grid = default_t_grid();
        let z = v(&[0.0, 0.0]);
        let e = estimate_d2(&ProxSpec::IndicatorOrthant { n: 2 }, &z, &z, &v(&[1.0, 1.0]), &grid, 20, 1)
            .unwrap();
        assert_eq!(e, D2Estimate { estimate: 0.0, diverging: false });

        let e = estimate_d2(&ProxSpec::SupportSharpCusp, &z, &z, &v(&[1.0, 0.0]), &grid, 20, 1).unwrap();
        assert!(e.diverging);

        let e = estimate_d2(&ProxSpec::L1 { weight: 1.0 }, &v(&[2.0]), &v(&[1.0]), &v(&[1.0]), &grid, 20, 1)
            .unwrap();
        assert!(!e.diverging);
        assert!(e.estimate.abs() < 1e-6);
    }

    #[test]
    fn group_curvature_estimate() {
        let phi = ProxSpec::GroupL2 {
            weight: 2.0,
            blocks: vec![vec![0, 1]],
        };
        let x = v(&[3.0, 4.0]);
        let vb = &x * (2.0 / 5.0);
        let h = v(&[-4.0, 3.0]) / 5.0;
        let e = estimate_d2(&phi, &x, &vb, &h, &default_t_grid(), 20, 3).unwrap();
        // ⟨h, Qh⟩ = (w/‖x‖)‖h‖² for h ⊥ x
        assert!((e.estimate - 0.4).abs() < 1e-3, "{e:?}");
    }

    #[test]
    fn l1_off_hull_direction_diverges() {
        let phi = ProxSpec::L1 { weight: 1.0 };
        let e = estimate_d2(&phi, &v(&[2.0, 0.0]), &v(&[1.0, 0.5]), &v(&[0.0, 1.0]), &default_t_grid(), 20, 5)
            .unwrap();
        assert!(e.diverging);
        assert_eq!(e.estimate, f64::INFINITY);
    }

    #[test]
    fn rejects_bad_grid() {
        let z = v(&[0.0]);
        let phi = ProxSpec::Zero;
        assert!(estimate_d2(&phi, &z, &z, &z, &[1e-2, 1e-1], 0, 0).is_err());
    }

    #[test]
    fn cusp_tangent_sets() {
        let grid = default_path_grid();
        let d = second_tangent_distance(ExampleSet::SharpCusp, &v(&[0.0, 0.0]), &v(&[1.0, 0.0]), &grid)
            .unwrap();
        assert_eq!(d, f64::INFINITY);
        let d = second_tangent_distance(ExampleSet::SharpCusp, &v(&[0.0, 0.0]), &v(&[-1.0, 0.0]), &grid)
            .unwrap();
        assert_eq!(d, f64::INFINITY);

        let p = v(&[1.0, 1.0]) / 2f64.sqrt();
        let d = second_tangent_distance(ExampleSet::SharpCusp, &v(&[1.0, 2.0 / 3.0]), &p, &grid).unwrap();
        // curvature ½·x₁^{-1/2} = ½ along a 45° tangent: ½·½·½·(1/√2)·2
        let exact = 1.0 / (4.0 * 2f64.sqrt());
        assert!((d - exact).abs() < 5e-3, "{d}");
    }

    #[test]
    fn arc_circle_curvature() {
        let d = second_tangent_distance(
            ExampleSet::ArcSegment,
            &v(&[1.0, 1.0, 0.0]),
            &v(&[0.0, 1.0, 0.0]),
            &default_path_grid(),
        )
        .unwrap();
        assert!((d - 1.0).abs() < 5e-3, "{d}");
    }

    #[test]
    fn tangent_preconditions() {
        let grid = default_path_grid();
        let err = second_tangent_distance(ExampleSet::SharpCusp, &v(&[0.0, -1.0]), &v(&[1.0, 0.0]), &grid)
            .unwrap_err();
        assert!(matches!(err, Error::NotInSet { .. }));
        let err = second_tangent_distance(ExampleSet::SharpCusp, &v(&[0.0, 0.0]), &v(&[0.0, -1.0]), &grid)
            .unwrap_err();
        assert!(matches!(err, Error::NotTangent { .. }));
    }

    struct Quartic;

    impl SmoothFunction for Quartic {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, x: &DVector<f64>) -> f64 {
            x[0].powi(4) / 4.0 + x[0] * x[1]
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            v(&[x[0].powi(3) + x[1], x[0]])
        }
        fn hessian(&self, x: &DVector<f64>) -> SymMatrix {
            SymMatrix::from_rows(&[vec![3.0 * x[0] * x[0], 1.0], vec![1.0, 0.0]]).unwrap()
        }
    }

    struct WrongHessian;

    impl SmoothFunction for WrongHessian {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, x: &DVector<f64>) -> f64 {
            Quartic.value(x)
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            Quartic.gradient(x)
        }
        fn hessian(&self, _: &DVector<f64>) -> SymMatrix {
            SymMatrix::identity(2)
        }
    }

    #[test]
    fn hessian_validation() {
        let x = v(&[0.7, -1.2]);
        assert!(hessian_fd_error(&Quartic, &x).unwrap() < 1e-8);
        assert!(validate_hessian(&Quartic, &x, 1e-6).is_ok());
        assert!(validate_hessian(&WrongHessian, &x, 1e-6).is_err());
    }
}
