//! Semismooth Newton on the normal map or the natural residual.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::lu_solve;
use crate::residual::{CompositeProblem, MatrixSet};
use crate::sampling;

/// How to choose `M_k` when the generalized Jacobian has several elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", content = "seed", rename_all = "snake_case")]
pub enum JacobianPick {
    #[default]
    First,
    Seeded(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Backtracking factor.
    pub damping: f64,
    pub min_step: f64,
    pub jacobian_pick: JacobianPick,
    /// Take a proximal-gradient step when Newton cannot make progress.
    pub fallback: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 100,
            tol: 1e-11,
            damping: 0.5,
            min_step: 1e-8,
            jacobian_pick: JacobianPick::First,
            fallback: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "damping must lie in (0, 1), got {}",
                self.damping
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.min_step > 0.0 && self.min_step <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "min_step must lie in (0, 1], got {}",
                self.min_step
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepType {
    Newton,
    Damped,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMap {
    /// Iterates are `z`, `F = F_nor`.
    Nor,
    /// Iterates are `x`, `F = F_nat`.
    Nat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub map: ResidualMap,
    #[serde(with = "crate::serde_vec::list")]
    pub iterates: Vec<DVector<f64>>,
    pub residual_norms: Vec<f64>,
    /// `step_types[k]` produced `iterates[k + 1]`.
    pub step_types: Vec<StepType>,
    pub converged: bool,
}

/// One row of the iteration table written to reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub k: usize,
    pub residual: f64,
    pub step_type: Option<StepType>,
    pub quotient: Option<f64>,
}

impl SolveTrace {
    pub fn last(&self) -> &DVector<f64> {
        self.iterates.last().expect("a trace holds at least the starting point")
    }

    pub fn final_residual(&self) -> f64 {
        *self.residual_norms.last().expect("a trace holds at least the starting point")
    }

    pub fn iterations(&self) -> usize {
        self.step_types.len()
    }

    /// The primal point `x`: `prox(z)` for normal-map traces.
    pub fn solution(&self, p: &CompositeProblem) -> Result<DVector<f64>> {
        match self.map {
            ResidualMap::Nor => p.phi.prox(p.tau, self.last()),
            ResidualMap::Nat => Ok(self.last().clone()),
        }
    }

    /// Iteration table; quotients are measured against the final iterate.
    pub fn table(&self) -> Vec<IterationRow> {
        let quotients = rate_profile(self, self.last())
            .map(|r| r.quotients)
            .unwrap_or_default();
        self.residual_norms
            .iter()
            .enumerate()
            .map(|(k, &residual)| IterationRow {
                k,
                residual,
                step_type: k.checked_sub(1).map(|j| self.step_types[j]),
                quotient: k.checked_sub(1).and_then(|j| quotients.get(j).copied()),
            })
            .collect()
    }
}

struct Newton<'a> {
    p: &'a CompositeProblem,
    map: ResidualMap,
    opts: &'a SolverOptions,
}

impl Newton<'_> {
    fn residual(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        match self.map {
            ResidualMap::Nor => self.p.normal_map(u),
            ResidualMap::Nat => self.p.natural_residual(u),
        }
    }

    fn matrices(&self, u: &DVector<f64>) -> Result<MatrixSet> {
        match self.map {
            ResidualMap::Nor => self.p.m_nor_set(u),
            ResidualMap::Nat => self.p.m_nat_set(u),
        }
    }

    /// Proximal-gradient step, lifted back to `z` for the normal map.
    fn fallback_step(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        let p = self.p;
        match self.map {
            ResidualMap::Nor => {
                let x = p.phi.prox(p.tau, u)?;
                Ok(&x - p.f.gradient(&x) * p.tau)
            }
            ResidualMap::Nat => {
                let u_grad = u - p.f.gradient(u) * p.tau;
                p.phi.prox(p.tau, &u_grad)
            }
        }
    }

    fn run(&self, u0: &DVector<f64>) -> Result<SolveTrace> {
        self.opts.validate()?;
        check_dim(self.p.dim(), u0.len())?;
        let mut rng = match self.opts.jacobian_pick {
            JacobianPick::First => None,
            JacobianPick::Seeded(seed) => Some(sampling::rng(seed)),
        };
        let mut u = u0.clone();
        let mut f = self.residual(&u)?;
        let mut r = f.norm();
        let mut trace = SolveTrace {
            map: self.map,
            iterates: vec![u.clone()],
            residual_norms: vec![r],
            step_types: Vec::new(),
            converged: r <= self.opts.tol,
        };
        for iteration in 0..self.opts.max_iter {
            if trace.converged {
                break;
            }
            let set = self.matrices(&u)?;
            let idx = match rng.as_mut() {
                Some(g) => g.random_range(0..set.elements.len()),
                None => 0,
            };
            let m: &DMatrix<f64> = &set.elements[idx];
            let step = match lu_solve(m, &(-&f)) {
                Some(d) => self.line_search(&u, &d, r)?,
                None if self.opts.fallback => None,
                None => {
                    return Err(Error::NewtonBreakdown {
                        iteration,
                        matrix: (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect(),
                    })
                }
            };
            let (next, next_f, kind) = match step {
                Some(s) => s,
                None if self.opts.fallback => {
                    let next = self.fallback_step(&u)?;
                    let next_f = self.residual(&next)?;
                    if next_f.norm() > r * (1.0 + 1e-12) {
                        break;
                    }
                    (next, next_f, StepType::Fallback)
                }
                None => break,
            };
            u = next;
            f = next_f;
            r = f.norm();
            trace.iterates.push(u.clone());
            trace.residual_norms.push(r);
            trace.step_types.push(kind);
            trace.converged = r <= self.opts.tol;
        }
        Ok(trace)
    }

    /// Backtracking with the sufficient-decrease test `‖F(u + s d)‖ ≤ (1 − 10⁻⁴ s)‖F(u)‖`.
    fn line_search(
        &self,
        u: &DVector<f64>,
        d: &DVector<f64>,
        r: f64,
    ) -> Result<Option<(DVector<f64>, DVector<f64>, StepType)>> {
        let mut s = 1.0;
        while s >= self.opts.min_step {
            let trial = u + d * s;
            let f = self.residual(&trial)?;
            if f.norm() <= (1.0 - 1e-4 * s) * r {
                let kind = if s == 1.0 { StepType::Newton } else { StepType::Damped };
                return Ok(Some((trial, f, kind)));
            }
            s *= self.opts.damping;
        }
        Ok(None)
    }
}

/// `z⁺ = z − M⁻¹F_nor(z)` with `M ∈ 𝓜_nor(z)`, globalized by backtracking.
pub fn solve_normal_map(
    p: &CompositeProblem,
    z0: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<SolveTrace> {
    Newton {
        p,
        map: ResidualMap::Nor,
        opts,
    }
    .run(z0)
}

/// `x⁺ = x − M⁻¹F_nat(x)` with `M ∈ 𝓜_nat(x)`, globalized by backtracking.
pub fn solve_natural_residual(
    p: &CompositeProblem,
    x0: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<SolveTrace> {
    Newton {
        p,
        map: ResidualMap::Nat,
        opts,
    }
    .run(x0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateProfile {
    pub quotients: Vec<f64>,
    pub superlinear: bool,
}

/// Error quotients `‖u_{k+1} − ref‖ / ‖u_k − ref‖`.
///
/// The profile stops at the first iterate equal to `ref`. It is flagged
/// superlinear when its last three quotients (all of them, if fewer) are
/// strictly decreasing and the final one is at most 0.1.
pub fn rate_profile(trace: &SolveTrace, reference: &DVector<f64>) -> Result<RateProfile> {
    if trace.iterates.len() < 2 {
        return Err(Error::InvalidArgument("rate profile needs at least two iterates".into()));
    }
    check_dim(trace.iterates[0].len(), reference.len())?;
    let errors: Vec<f64> = trace.iterates.iter().map(|u| (u - reference).norm()).collect();
    let mut quotients = Vec::new();
    for w in errors.windows(2) {
        if w[0] == 0.0 {
            break;
        }
        quotients.push(w[1] / w[0]);
    }
    let tail = &quotients[quotients.len().saturating_sub(3)..];
    let superlinear = !tail.is_empty()
        && tail.windows(2).all(|w| w[1] < w[0])
        && *tail.last().expect("nonempty") <= 0.1;
    Ok(RateProfile {
        quotients,
        superlinear,
    })
}
