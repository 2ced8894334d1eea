use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use ssncert_core::solver::IterationRow;
use ssncert_core::{CertificationReport, CompositeProblem, ConditionVerdict, SolveTrace};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Everything a command writes. Deterministic for a fixed input and seed.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<ConditionVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reproduce: Option<ReproduceSection>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSection {
    pub map: String,
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    /// Primal point `x`, i.e. `prox(z)` for normal-map solves.
    pub solution: Vec<f64>,
    pub trace: Vec<IterationRow>,
}

impl SolveSection {
    pub fn new(p: &CompositeProblem, trace: &SolveTrace) -> ssncert_core::Result<Self> {
        Ok(SolveSection {
            map: serde_json::to_value(trace.map)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default(),
            converged: trace.converged,
            iterations: trace.iterations(),
            final_residual: trace.final_residual(),
            solution: trace.solution(p)?.as_slice().to_vec(),
            trace: trace.table(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReproduceSection {
    pub example: String,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub data: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    /// SHA-256 of the problem file bytes, when there is one.
    pub input_sha256: Option<String>,
    pub seed: Option<u64>,
    pub version: String,
}

impl Provenance {
    pub fn new(input: Option<&[u8]>, seed: Option<u64>) -> Self {
        Provenance {
            input_sha256: input.map(|bytes| hex::encode(Sha256::digest(bytes))),
            seed,
            version: env!("CARGO_PKG_VERSION").to_owned(),
        }
    }
}

impl RunReport {
    pub fn new(command: &str, provenance: Provenance) -> Self {
        RunReport {
            schema_version: REPORT_SCHEMA_VERSION,
            command: command.to_owned(),
            solve: None,
            certify: None,
            probe: None,
            reproduce: None,
            provenance,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }
}
