use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ssncert_core::certify::{smr_probe, SmrMap};
use ssncert_core::{
    cross_check, solve_natural_residual, CertificationReport, solve_normal_map, CompositeProblem, CrossCheckOptions, DVector,
    SolveTrace, SolverOptions, StationaryTriple,
};

use crate::error::{CliError, EXIT_FAILURE, EXIT_INCONSISTENT, EXIT_NOT_CONVERGED, EXIT_OK};
use crate::problem::ProblemFile;
use crate::report::{Provenance, RunReport, SolveSection};
use crate::reproduce::Example;

#[derive(Debug, Parser)]
#[command(name = "ssncert", version, about = "Semismooth Newton solves and second-order certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve with semismooth Newton on the normal map or the natural residual.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = MapArg::Nor)]
        map: MapArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run the full condition battery at a stationary point.
    Certify {
        file: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Sample the strong metric regularity constant of one residual map.
    ProbeSmr {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = MapArg::Nat)]
        map: MapArg,
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Recompute one of the built-in worked examples and check its numbers.
    Reproduce {
        #[arg(value_enum)]
        example: Example,
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MapArg {
    Nat,
    Nor,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-11)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
}

impl SolverArgs {
    fn options(&self) -> Result<SolverOptions, CliError> {
        let opts = SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            ..SolverOptions::default()
        };
        opts.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(opts)
    }
}

#[derive(Debug, Args)]
pub struct SeedArg {
    #[arg(long, env = "SSN_CERTIFY_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A finished command: the report to write and the process exit code.
#[derive(Debug)]
pub struct Outcome {
    pub report: RunReport,
    pub exit_code: i32,
    /// Human-readable notes for standard error.
    pub diagnostics: Vec<String>,
}

impl Command {
    pub fn out(&self) -> Option<&Path> {
        match self {
            Command::Solve { out, .. }
            | Command::Certify { out, .. }
            | Command::ProbeSmr { out, .. }
            | Command::Reproduce { out, .. } => out.out.as_deref(),
        }
    }
}

struct Loaded {
    file: ProblemFile,
    problem: CompositeProblem,
    bytes: Vec<u8>,
}

fn load(path: &Path) -> Result<Loaded, CliError> {
    let bytes = fs::read(path).map_err(|source| CliError::Read {
        path: path.to_owned(),
        source,
    })?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Malformed {
        line: 1,
        field: String::new(),
        message: e.to_string(),
    })?;
    let file = ProblemFile::parse(&text)?;
    let problem = file.problem()?;
    Ok(Loaded { file, problem, bytes })
}

fn start(v: Option<&Vec<f64>>, n: usize) -> DVector<f64> {
    v.map_or_else(|| DVector::zeros(n), |v| DVector::from_column_slice(v))
}

fn solve(l: &Loaded, map: MapArg, opts: &SolverOptions) -> Result<SolveTrace, CliError> {
    let n = l.problem.dim();
    let f = &l.file;
    Ok(match map {
        MapArg::Nor => solve_normal_map(&l.problem, &start(f.z0.as_ref().or(f.x0.as_ref()), n), opts)?,
        MapArg::Nat => solve_natural_residual(&l.problem, &start(f.x0.as_ref(), n), opts)?,
    })
}

/// The stationary triple at `at`, or at the end of a default normal-map
/// solve; `None` when that solve fails (its trace is left in `report`).
fn stationary(l: &Loaded, opts: &SolverOptions, report: &mut RunReport) -> Result<Option<StationaryTriple>, CliError> {
    if let Some(at) = &l.file.at {
        return Ok(Some(StationaryTriple::from_x(&l.problem, &DVector::from_column_slice(at))?));
    }
    let trace = solve(l, MapArg::Nor, opts)?;
    report.solve = Some(SolveSection::new(&l.problem, &trace)?);
    if !trace.converged {
        return Ok(None);
    }
    Ok(Some(StationaryTriple::from_z(&l.problem, trace.last())?))
}

fn not_converged(report: RunReport) -> Outcome {
    let residual = report.solve.as_ref().map_or(f64::NAN, |s| s.final_residual);
    Outcome {
        report,
        exit_code: EXIT_NOT_CONVERGED,
        diagnostics: vec![format!("solver did not converge (final residual {residual:e})")],
    }
}

pub fn execute(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Solve { file, solver, map, .. } => {
            let l = load(file)?;
            let trace = solve(&l, *map, &solver.options()?)?;
            let mut report = RunReport::new("solve", Provenance::new(Some(&l.bytes), None));
            report.solve = Some(SolveSection::new(&l.problem, &trace)?);
            if !trace.converged {
                return Ok(not_converged(report));
            }
            Ok(Outcome {
                report,
                exit_code: EXIT_OK,
                diagnostics: Vec::new(),
            })
        }
        Command::Certify { file, solver, seed, .. } => {
            let l = load(file)?;
            let opts = solver.options()?;
            let mut report = RunReport::new("certify", Provenance::new(Some(&l.bytes), Some(seed.seed)));
            let Some(st) = stationary(&l, &opts, &mut report)? else {
                return Ok(not_converged(report));
            };
            let cc = CrossCheckOptions {
                seed: seed.seed,
                ..CrossCheckOptions::default()
            };
            let cert = cross_check(&l.problem, &st, &cc)?;
            let (exit_code, diagnostics) = certify_exit(&cert);
            report.certify = Some(cert);
            Ok(Outcome {
                report,
                exit_code,
                diagnostics,
            })
        }
        Command::ProbeSmr {
            file,
            map,
            radius,
            pairs,
            seed,
            ..
        } => {
            let l = load(file)?;
            let mut report = RunReport::new("probe-smr", Provenance::new(Some(&l.bytes), Some(seed.seed)));
            let Some(st) = stationary(&l, &SolverOptions::default(), &mut report)? else {
                return Ok(not_converged(report));
            };
            let (smr_map, center) = match map {
                MapArg::Nat => (SmrMap::Nat, &st.x_bar),
                MapArg::Nor => (SmrMap::Nor, &st.z_bar),
            };
            report.probe = Some(smr_probe(smr_map, &l.problem, center, *radius, *pairs, seed.seed)?);
            Ok(Outcome {
                report,
                exit_code: EXIT_OK,
                diagnostics: Vec::new(),
            })
        }
        Command::Reproduce { example, seed, .. } => {
            let input = example.problem_text().map(str::as_bytes);
            let mut report = RunReport::new("reproduce", Provenance::new(input, Some(seed.seed)));
            let section = example.run(seed.seed)?;
            let diagnostics: Vec<String> = section
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("check `{}` failed: {}", c.name, c.detail))
                .collect();
            let exit_code = if section.passed { EXIT_OK } else { EXIT_FAILURE };
            report.reproduce = Some(section);
            Ok(Outcome {
                report,
                exit_code,
                diagnostics,
            })
        }
    }
}

fn certify_exit(cert: &CertificationReport) -> (i32, Vec<String>) {
    let mut diagnostics = cert.warnings.clone();
    if cert.is_inconsistent() {
        diagnostics.push(format!("inconsistent certificates: {:?}", cert.consensus));
        (EXIT_INCONSISTENT, diagnostics)
    } else {
        (EXIT_OK, diagnostics)
    }
}

/// Writes the report to `out`, or standard output when `None`.
pub fn write_report(report: &RunReport, out: Option<&Path>) -> Result<(), CliError> {
    let json = report.to_json();
    match out {
        Some(path) => fs::write(path, json).map_err(|source| CliError::Write {
            path: path.to_owned(),
            source,
        }),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ssncert_core::{ConditionId, Consensus};

    fn report(consensus: Consensus) -> CertificationReport {
        CertificationReport {
            schema_version: 1,
            problem_hash: String::new(),
            verdicts: Vec::new(),
            consensus,
            warnings: vec!["w".into()],
        }
    }

    #[test]
    fn only_inconsistent_consensus_fails_certify() {
        let (code, notes) = certify_exit(&report(Consensus::Inconsistent {
            clashing: vec![ConditionId::I, ConditionId::ViBd],
        }));
        assert_eq!((code, notes.len()), (EXIT_INCONSISTENT, 2));
        let (code, notes) = certify_exit(&report(Consensus::ExpectedDivergence { notes: Vec::new() }));
        assert_eq!((code, notes), (EXIT_OK, vec!["w".to_owned()]));
    }

    #[test]
    fn seed_defaults_to_zero_and_reads_the_environment() {
        let cli = Cli::try_parse_from(["ssncert", "certify", "p.json"]).unwrap();
        let Command::Certify { seed, solver, .. } = cli.command else { panic!() };
        assert_eq!((solver.max_iter, solver.tol), (100, 1e-11));
        if std::env::var_os("SSN_CERTIFY_SEED").is_none() {
            assert_eq!(seed.seed, 0);
        }
        let cli = Cli::try_parse_from(["ssncert", "probe-smr", "p.json", "--seed", "9"]).unwrap();
        let Command::ProbeSmr { seed, map, radius, pairs, .. } = cli.command else { panic!() };
        assert_eq!((seed.seed, map, radius, pairs), (9, MapArg::Nat, 0.1, 1000));
    }

    #[test]
    fn rejects_unknown_examples() {
        assert!(Cli::try_parse_from(["ssncert", "reproduce", "exam-9-9"]).is_err());
    }
}
