//! Support functions of two non-polyhedral planar/spatial sets:
//!
//! * the arc-segment set `conv({0}×{0}×[−1,1] ∪ right half of the unit circle
//!   centred at (0,1) in the x3 = 0 plane)`;
//! * the cusp `{x ∈ R² : x2 ≥ (2/3)|x1|^{3/2}}`.
//!
//! Both are handled through exact projections (closed form or monotone
//! bisection), so the prox of the support function follows from Moreau's
//! identity.

use nalgebra::DVector;

use crate::linalg::SymMatrix;

const BISECTION_STEPS: usize = 200;

/// Bisection for the root of a function with `f(lo) ≤ 0 ≤ f(hi)` (or the
/// reverse), run until the bracket stops shrinking.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let f_lo = f(lo);
    if f_lo == 0.0 {
        return lo;
    }
    let lo_negative = f_lo < 0.0;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn soft(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

// ---------------------------------------------------------------------------
// arc-segment set

/// Support function of the half disk `{c1 ≥ 0, c1² + (c2 − 1)² ≤ 1}`.
fn half_disk_support(x1: f64, x2: f64) -> f64 {
    if x1 >= 0.0 {
        x2 + x1.hypot(x2)
    } else {
        (2.0 * x2).max(0.0)
    }
}

fn project_half_disk(p1: f64, p2: f64) -> (f64, f64) {
    if p1 >= 0.0 {
        let (d1, d2) = (p1, p2 - 1.0);
        let r = d1.hypot(d2);
        if r <= 1.0 {
            (p1, p2)
        } else {
            (d1 / r, 1.0 + d2 / r)
        }
    } else {
        (0.0, p2.clamp(0.0, 2.0))
    }
}

/// prox of `t·σ_half_disk` at `(z1, z2)`.
fn half_disk_prox(z1: f64, z2: f64, t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (z1, z2);
    }
    let (c1, c2) = project_half_disk(z1 / t, z2 / t);
    (z1 - t * c1, z2 - t * c2)
}

pub fn arc_support(x: &DVector<f64>) -> f64 {
    x[2].abs().max(half_disk_support(x[0], x[1]))
}

/// prox of `τ σ_C` for the arc-segment set.
///
/// `σ_C = max(g1, g2)` with `g1 = |x3|` and `g2 = σ_D(x1, x2)`. For a weight
/// `μ ∈ [0, 1]` the split problem with `μ g1 + (1 − μ) g2` separates; the
/// concave dual has slope `g1 − g2`, which is bisected to zero.
pub fn arc_prox(z: &DVector<f64>, tau: f64) -> DVector<f64> {
    let at = |mu: f64| {
        let x3 = soft(z[2], tau * mu);
        let (x1, x2) = half_disk_prox(z[0], z[1], tau * (1.0 - mu));
        (x1, x2, x3)
    };
    let slope = |mu: f64| {
        let (x1, x2, x3) = at(mu);
        x3.abs() - half_disk_support(x1, x2)
    };
    let mu = if slope(0.0) <= 0.0 {
        0.0
    } else if slope(1.0) >= 0.0 {
        1.0
    } else {
        // slope is nonincreasing: positive at 0, negative at 1
        bisect(1.0, 0.0, slope)
    };
    let (x1, x2, x3) = at(mu);
    DVector::from_vec(vec![x1, x2, x3])
}

/// Euclidean projection onto the arc-segment set.
pub fn arc_project(p: &DVector<f64>) -> DVector<f64> {
    p - arc_prox(p, 1.0)
}

/// The open region where `σ_C(x) = ‖(x1, x2)‖ + x2` and `σ_C` is C².
pub fn arc_in_smooth_region(x: &DVector<f64>) -> bool {
    let n = x[0].hypot(x[1]);
    x[0] > 0.0 && x[1] < 0.0 && x[2].abs() < n + x[1]
}

pub fn arc_gradient(x: &DVector<f64>) -> DVector<f64> {
    let n = x[0].hypot(x[1]);
    DVector::from_vec(vec![x[0] / n, (n + x[1]) / n, 0.0])
}

pub fn arc_hessian(x: &DVector<f64>) -> SymMatrix {
    let (a, b) = (x[0], x[1]);
    let n2 = a * a + b * b;
    let n3 = n2 * n2.sqrt();
    SymMatrix::symmetrize(nalgebra::DMatrix::from_row_slice(
        3,
        3,
        &[
            (n2 - a * a) / n3,
            -a * b / n3,
            0.0,
            -a * b / n3,
            (n2 - b * b) / n3,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
    ))
}

/// Sequence point `x_k = (1/k)(1/k, −√(1 − 1/k²), 0)` with its multiplier
/// `λ_k = (1/k, 1 − √(1 − 1/k²), 0)` on the circle arc.
pub fn arc_sequence(k: u32) -> (DVector<f64>, DVector<f64>) {
    let kf = f64::from(k);
    let root = (1.0 - 1.0 / (kf * kf)).sqrt();
    let x = DVector::from_vec(vec![1.0 / (kf * kf), -root / kf, 0.0]);
    // 1 − √(1 − s) written without cancellation
    let s = 1.0 / (kf * kf);
    let lambda = DVector::from_vec(vec![1.0 / kf, s / (1.0 + root), 0.0]);
    (x, lambda)
}

// ---------------------------------------------------------------------------
// cusp set

fn cusp_boundary(s: f64) -> f64 {
    2.0 / 3.0 * s.abs().powf(1.5)
}

pub fn cusp_contains(p: &DVector<f64>, tol: f64) -> bool {
    p[1] >= cusp_boundary(p[0]) - tol
}

/// Euclidean projection onto the cusp set.
///
/// Outside points are `b(s) + t·n(s)` with boundary point
/// `b(s) = (s, (2/3)|s|^{3/2})` and outward normal `n(s) = (sgn(s)√|s|, −1)`;
/// the foot `s` lies between 0 and `p1` and is found by bisection on the
/// cross product of `p − b(s)` with `n(s)`.
pub fn cusp_project(p: &DVector<f64>) -> DVector<f64> {
    let (y1, y2) = (p[0], p[1]);
    if y2 >= cusp_boundary(y1) {
        return p.clone();
    }
    if y1 == 0.0 {
        return DVector::zeros(2);
    }
    let cross = |s: f64| {
        let nx = s.signum() * s.abs().sqrt();
        -(y1 - s) - (y2 - cusp_boundary(s)) * nx
    };
    let s = bisect(0.0, y1, cross);
    DVector::from_vec(vec![s, cusp_boundary(s)])
}

pub fn cusp_distance(p: &DVector<f64>) -> f64 {
    (p - cusp_project(p)).norm()
}

/// `σ_C(x) = |x1|³ / (3 x2²)` for `x2 < 0`, `0` at the origin, `+∞` otherwise.
pub fn cusp_support(x: &DVector<f64>) -> f64 {
    let (a, b) = (x[0], x[1]);
    if b < 0.0 {
        a.abs().powi(3) / (3.0 * b * b)
    } else if a == 0.0 && b == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn cusp_prox(z: &DVector<f64>, tau: f64) -> DVector<f64> {
    let p = z / tau;
    // z − τ·(z/τ) leaves round-off, and σ_C is +∞ off {x2 < 0} ∪ {0}.
    if cusp_contains(&p, 0.0) {
        return DVector::zeros(2);
    }
    z - cusp_project(&p) * tau
}

pub fn cusp_gradient(x: &DVector<f64>) -> DVector<f64> {
    let (a, b) = (x[0], x[1]);
    DVector::from_vec(vec![a * a.abs() / (b * b), -2.0 * a.abs().powi(3) / (3.0 * b.powi(3))])
}

pub fn cusp_hessian(x: &DVector<f64>) -> SymMatrix {
    let (a, b) = (x[0], x[1]);
    let haa = 2.0 * a.abs() / (b * b);
    let hab = -2.0 * a * a.abs() / b.powi(3);
    let hbb = 2.0 * a.abs().powi(3) / b.powi(4);
    SymMatrix::symmetrize(nalgebra::DMatrix::from_row_slice(2, 2, &[haa, hab, hab, hbb]))
}

/// `x_k = (−1/k³, −1/k)` with `λ_k = ∇σ_C(x_k) = (−1/k⁴, 2/(3k⁶))`.
///
/// The mirrored sign on the first coordinate is what makes the Hessian
/// `2[[1/k, −1/k³], [−1/k³, 1/k⁵]]`; with `+1/k³` the off-diagonal flips.
pub fn cusp_sequence(k: u32) -> (DVector<f64>, DVector<f64>) {
    let kf = f64::from(k);
    let x = DVector::from_vec(vec![-1.0 / kf.powi(3), -1.0 / kf]);
    let lambda = DVector::from_vec(vec![-1.0 / kf.powi(4), 2.0 / (3.0 * kf.powi(6))]);
    (x, lambda)
}

/// Unit outward normal of the cusp boundary at `b(s)`.
pub fn cusp_unit_normal(s: f64) -> DVector<f64> {
    let n = DVector::from_vec(vec![s.signum() * s.abs().sqrt(), -1.0]);
    let norm = n.norm();
    n / norm
}
