use serde::{Deserialize, Serialize};
use serde_json::Value;
use ssncert_core::{CompositeProblem, DVector, ProxSpec, SymMatrix};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// On-disk problem description.
///
/// ```json
/// {"schema_version": 1,
///  "f": {"type": "quadratic", "A": [[1, 0], [0, 1]], "b": [3, 0.5]},
///  "phi": {"kind": "l1", "weight": 1.0},
///  "tau": 1.0}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: u32,
    pub f: SmoothSpec,
    pub phi: ProxSpec,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0: Option<Vec<f64>>,
    /// Stationary point to certify instead of solving for one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SmoothSpec {
    /// `f(x) = ½ xᵀAx − bᵀx`
    Quadratic {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
}

impl ProblemFile {
    /// Parses and validates a problem file; `A` comes back symmetrized.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: Value = serde_json::from_str(text).map_err(|e| CliError::Malformed {
            line: e.line(),
            field: String::new(),
            message: e.to_string(),
        })?;
        if let Some(kind) = raw.pointer("/phi/kind").and_then(Value::as_str) {
            if !ProxSpec::KINDS.contains(&kind) {
                return Err(CliError::UnknownKind {
                    kind: kind.to_owned(),
                    line: locate(text, "kind"),
                });
            }
        }
        let mut de = serde_json::Deserializer::from_str(text);
        let mut file: ProblemFile = serde_path_to_error::deserialize(&mut de).map_err(|e| CliError::Malformed {
            line: e.inner().line(),
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        file.validate(text)?;
        Ok(file)
    }

    fn validate(&mut self, text: &str) -> Result<(), CliError> {
        let bad = |field: &str, message: String| CliError::Malformed {
            line: locate(text, field.rsplit('.').next().unwrap_or(field)),
            field: field.to_owned(),
            message,
        };
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad(
                "schema_version",
                format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        let SmoothSpec::Quadratic { a, b } = &mut self.f;
        let sym = SymMatrix::from_rows(a).map_err(|e| bad("f.A", e.to_string()))?;
        if b.len() != sym.dim() {
            return Err(bad("f.b", format!("expected {} entries, got {}", sym.dim(), b.len())));
        }
        *a = sym.to_rows();
        let problem = self.problem().map_err(|e| match e {
            CliError::Core(err) => bad(blame(&err), err.to_string()),
            other => other,
        })?;
        let n = problem.dim();
        for (name, v) in [("x0", &self.x0), ("z0", &self.z0), ("at", &self.at)] {
            if let Some(v) = v {
                if v.len() != n {
                    return Err(bad(name, format!("expected {n} entries, got {}", v.len())));
                }
            }
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<CompositeProblem, CliError> {
        let SmoothSpec::Quadratic { a, b } = &self.f;
        let a = SymMatrix::from_rows(a)?;
        Ok(CompositeProblem::quadratic(a, DVector::from_column_slice(b), self.phi.clone(), self.tau)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files serialize") + "\n"
    }
}

/// Field most likely responsible for a problem-construction error.
fn blame(err: &ssncert_core::Error) -> &'static str {
    use ssncert_core::Error as E;
    match err {
        E::InvalidArgument(msg) if msg.contains("tau") => "tau",
        _ => "phi",
    }
}

/// 1-based line of the first occurrence of `"key"`, or 1.
fn locate(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map_or(1, |i| i + 1)
}
