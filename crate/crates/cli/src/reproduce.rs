//! Self-contained re-derivations of the worked examples shipped with the tool.

use clap::ValueEnum;
use serde_json::{json, Value};
use ssncert_core::certify::{bd_regularity, check_p1, check_ssosc, smr_probe, SmrMap};
use ssncert_core::linalg::SymMatrix;
use ssncert_core::prox::SecondOrderDescriptor;
use ssncert_core::solver::solve_natural_residual;
use ssncert_core::variational::{default_t_grid, estimate_d2, PolyhedralCone};
use ssncert_core::{
    cross_check, CrossCheckOptions, DMatrix, DVector, ProxSpec, SolverOptions, StationaryTriple, Status, Subspace,
};

use crate::error::CliError;
use crate::problem::ProblemFile;
use crate::report::{CheckResult, ReproduceSection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Example {
    /// Arc-segment support function: Hessian limit and the core condition.
    #[value(name = "exam-2-11")]
    Exam2_11,
    /// Sharp-cusp support function: Hessian table, Jacobian limit, divergent quotients.
    #[value(name = "exam-2-12")]
    Exam2_12,
    /// Orthant indicator with an indefinite quadratic: BD-regular but not SSOSC.
    #[value(name = "exam-4-2")]
    Exam4_2,
    /// Cone indicator: closed-form natural residual and its strong metric regularity.
    #[value(name = "exam-4-3-cone")]
    Exam4_3Cone,
}

pub const EXAM_4_2: &str = include_str!("../data/exam-4-2.problem.json");
pub const CONE: &str = include_str!("../data/cone.problem.json");
pub const EXAM_2_12: &str = include_str!("../data/exam-2-12.problem.json");

impl Example {
    pub fn name(self) -> &'static str {
        match self {
            Example::Exam2_11 => "exam-2-11",
            Example::Exam2_12 => "exam-2-12",
            Example::Exam4_2 => "exam-4-2",
            Example::Exam4_3Cone => "exam-4-3-cone",
        }
    }

    /// The embedded problem file the example runs on, if any.
    pub fn problem_text(self) -> Option<&'static str> {
        match self {
            Example::Exam2_11 => None,
            Example::Exam2_12 => Some(EXAM_2_12),
            Example::Exam4_2 => Some(EXAM_4_2),
            Example::Exam4_3Cone => Some(CONE),
        }
    }

    pub fn run(self, seed: u64) -> Result<ReproduceSection, CliError> {
        let mut checks = Checks::default();
        let data = match self {
            Example::Exam2_11 => arc(&mut checks)?,
            Example::Exam2_12 => cusp(&mut checks, seed)?,
            Example::Exam4_2 => orthant(&mut checks, seed)?,
            Example::Exam4_3Cone => cone(&mut checks, seed)?,
        };
        Ok(ReproduceSection {
            example: self.name().to_owned(),
            passed: checks.0.iter().all(|c| c.passed),
            checks: checks.0,
            data,
        })
    }
}

#[derive(Default)]
struct Checks(Vec<CheckResult>);

impl Checks {
    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.0.push(CheckResult {
            name: name.to_owned(),
            passed,
            detail,
        });
    }
}

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

fn embedded(text: &str) -> Result<ssncert_core::CompositeProblem, CliError> {
    ProblemFile::parse(text)?.problem()
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn arc(checks: &mut Checks) -> Result<Value, CliError> {
    let arc = ProxSpec::SupportArcSegment;
    let target = SymMatrix::from_diagonal(&[0.0, 1.0, 1.0]);
    let mut table = Vec::new();
    for k in [10u32, 100, 1000, 10_000] {
        let pt = arc.example_sequence(k)?;
        let inv = (&SymMatrix::identity(3) + &pt.hessian)
            .inverse()
            .ok_or_else(|| CliError::Usage(format!("I + H singular at k = {k}")))?;
        let err = (&inv - &target).frobenius();
        if k == 1000 {
            checks.push("jacobian_limit_k1000", err <= 1e-2, format!("‖(I + H)⁻¹ − diag(0,1,1)‖ = {err:e}"));
        }
        table.push(json!({ "k": k, "x": pt.x.as_slice(), "limit_error": err }));
    }
    let decreasing = table
        .windows(2)
        .all(|w| w[1]["limit_error"].as_f64() < w[0]["limit_error"].as_f64());
    checks.push("limit_error_decreases", decreasing, "errors shrink along the sequence".into());

    let set = arc.bd_prox_set(1.0, &v(&[0.0, 0.0, 0.0]))?;
    let plane = Subspace::coordinate(3, &[0, 1]);
    let desc = SecondOrderDescriptor {
        q: SymMatrix::zeros(3),
        s_cone: PolyhedralCone::subspace(plane.clone()),
        aff_s: plane,
        lambda_bar: None,
    };
    let p1 = check_p1(&set, &desc, 1.0, 0.0)?;
    checks.push(
        "core_condition_fails",
        p1.status.truth() == Some(false),
        format!("status {:?}", p1.status),
    );
    Ok(json!({ "sequence": table, "core_condition": p1 }))
}

fn cusp(checks: &mut Checks, seed: u64) -> Result<Value, CliError> {
    let cusp = ProxSpec::SupportSharpCusp;
    let mut table = Vec::new();
    let mut worst: f64 = 0.0;
    for k in [2u32, 3, 5, 10, 30, 100, 1000] {
        let pt = cusp.example_sequence(k)?;
        let kf = f64::from(k);
        let want = SymMatrix::from_rows(&[
            vec![2.0 / kf, -2.0 / kf.powi(3)],
            vec![-2.0 / kf.powi(3), 2.0 / kf.powi(5)],
        ])?;
        let err = (&pt.hessian - &want).as_matrix().amax();
        worst = worst.max(err);
        table.push(json!({ "k": k, "x": pt.x.as_slice(), "hessian": pt.hessian.to_rows(), "error": err }));
    }
    checks.push("hessian_closed_form", worst <= 1e-14, format!("max entry error {worst:e}"));

    let pt = cusp.example_sequence(1000)?;
    let jac = cusp.bd_prox_set(1.0, &(&pt.x + &pt.v))?;
    let gap = match jac.elements.as_slice() {
        [d] => (d - &SymMatrix::identity(2)).frobenius(),
        _ => f64::INFINITY,
    };
    checks.push("jacobian_limit_k1000", gap <= 1e-2, format!("‖Dprox − I‖ = {gap:e}"));

    let origin = v(&[0.0, 0.0]);
    let d2 = estimate_d2(&cusp, &origin, &origin, &v(&[1.0, 0.0]), &default_t_grid(), 20, seed)?;
    checks.push("quotients_diverge_along_e1", d2.diverging, format!("{d2:?}"));

    let p = embedded(EXAM_2_12)?;
    let st = StationaryTriple::from_x(&p, &origin)?;
    let opts = CrossCheckOptions {
        seed,
        ..CrossCheckOptions::default()
    };
    let report = cross_check(&p, &st, &opts)?;
    checks.push(
        "consensus_not_inconsistent",
        !report.is_inconsistent(),
        format!("{:?}", report.consensus),
    );
    Ok(json!({ "hessian_table": table, "jacobian_gap": gap, "d2_e1": d2, "certify": report }))
}

fn orthant(checks: &mut Checks, seed: u64) -> Result<Value, CliError> {
    let p = embedded(EXAM_4_2)?;
    let z = v(&[0.0, 0.0]);
    let set = p.phi.bd_prox_set(p.tau, &z)?;
    let expected: Vec<_> = [[1.0, 1.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]
        .map(|d| SymMatrix::from_diagonal(&d))
        .to_vec();
    checks.push(
        "jacobian_set",
        set.exhaustive && set.elements == expected,
        format!("{} elements, exhaustive = {}", set.elements.len(), set.exhaustive),
    );

    let m = p.m_nor_set(&z)?;
    let want_m = [
        [2.0, 2.0, 2.0, 1.0],
        [2.0, 0.0, 2.0, 1.0],
        [1.0, 2.0, 0.0, 1.0],
        [1.0, 0.0, 0.0, 1.0],
    ]
    .map(|r| DMatrix::from_row_slice(2, 2, &r))
    .to_vec();
    checks.push("normal_map_jacobians", m.elements == want_m, format!("{} elements", m.elements.len()));

    let bd = bd_regularity(&m);
    checks.push("bd_regular", bd.status == Status::CertifiedTrue, format!("{:?}", bd.status));

    let st = StationaryTriple::from_x(&p, &z)?;
    let desc = p.phi.second_order_descriptor(&st.x_bar, &st.v_bar)?;
    let ssosc = check_ssosc(&desc, &p.f.hessian(&st.x_bar))?;
    let want = (3.0 - 17f64.sqrt()) / 2.0;
    let sigma = ssosc.sigma.unwrap_or(f64::NAN);
    checks.push(
        "ssosc_fails_with_exact_constant",
        ssosc.status == Status::CertifiedFalse && (sigma - want).abs() <= 1e-12,
        format!("{:?}, σ = {sigma:e}, expected {want:e}", ssosc.status),
    );

    let opts = CrossCheckOptions {
        seed,
        ..CrossCheckOptions::default()
    };
    let report = cross_check(&p, &st, &opts)?;
    checks.push(
        "divergence_is_expected",
        matches!(report.consensus, ssncert_core::Consensus::ExpectedDivergence { .. }),
        format!("{:?}", report.consensus),
    );
    Ok(json!({
        "jacobians": set.elements.iter().map(SymMatrix::to_rows).collect::<Vec<_>>(),
        "normal_map_jacobians": m.elements.iter().map(rows).collect::<Vec<_>>(),
        "certify": report,
    }))
}

fn cone(checks: &mut Checks, seed: u64) -> Result<Value, CliError> {
    let p = embedded(CONE)?;
    let grid: Vec<f64> = (0..10).map(|i| -1.0 + 2.0 * i as f64 / 9.0).collect();
    let mut residual_err: f64 = 0.0;
    let mut inverse_err: f64 = 0.0;
    for &a in &grid {
        for &b in &grid {
            let r = p.natural_residual(&v(&[a, b]))?;
            residual_err = residual_err.max((r - v(&[a - 0.75 * b.abs(), 0.25 * b])).amax());
            let y = v(&[a, b]);
            let g = v(&[a + 3.0 * b.abs(), 4.0 * b]);
            inverse_err = inverse_err.max((p.natural_residual(&g)? - y).amax());
        }
    }
    checks.push("residual_closed_form", residual_err <= 1e-14, format!("max error {residual_err:e}"));
    checks.push("residual_inverse", inverse_err <= 1e-14, format!("max error {inverse_err:e}"));

    let origin = v(&[0.0, 0.0]);
    let smr = smr_probe(SmrMap::Nat, &p, &origin, 0.5, 10_000, seed)?;
    let sigma = smr.sigma.unwrap_or(f64::NAN);
    checks.push("smr_constant", (0.19..=0.26).contains(&sigma), format!("σ = {sigma}"));

    let st = StationaryTriple::from_x(&p, &origin)?;
    let desc = p.phi.second_order_descriptor(&st.x_bar, &st.v_bar)?;
    let ssosc = check_ssosc(&desc, &p.f.hessian(&st.x_bar))?;
    checks.push("ssosc_fails", ssosc.status == Status::CertifiedFalse, format!("{:?}", ssosc.status));

    let trace = solve_natural_residual(&p, &v(&[0.4, 0.1]), &SolverOptions::default())?;
    let dist = trace.last().amax();
    checks.push(
        "natural_residual_solve",
        trace.converged && dist <= 1e-9,
        format!("{} iterations, ‖x‖∞ = {dist:e}", trace.iterations()),
    );
    Ok(json!({
        "residual_error": residual_err,
        "inverse_error": inverse_err,
        "smr": smr,
        "ssosc": ssosc,
        "solve": { "iterations": trace.iterations(), "solution": trace.last().as_slice(), "trace": trace.table() },
    }))
}
