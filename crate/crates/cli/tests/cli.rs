use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use ssncert_cli::ProblemFile;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn ssncert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssncert"))
        .args(args)
        .env_remove("SSN_CERTIFY_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn scratch(name: &str, text: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR"));
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

/// Compares against a checked-in report; `UPDATE_GOLDENS=1` rewrites it.
fn assert_golden(name: &str, stdout: &[u8]) {
    let path = golden(name);
    let actual = String::from_utf8(stdout.to_vec()).unwrap();
    if std::env::var_os("UPDATE_GOLDENS").is_some() {
        fs::write(&path, &actual).unwrap();
    }
    let expected = fs::read_to_string(&path).unwrap();
    assert_eq!(actual, expected, "{name} drifted from its golden copy");
}

#[test]
fn lasso_solve_finds_the_soft_thresholded_point() {
    let lasso = data("lasso-2d.problem.json");
    for map in ["nor", "nat"] {
        let out = ssncert(&["solve", lasso.to_str().unwrap(), "--map", map]);
        assert_eq!(out.status.code(), Some(0));
        let report = json(&out);
        assert_eq!(report["solve"]["solution"], serde_json::json!([2.0, 0.0]));
        assert_eq!(report["solve"]["converged"], true);
        assert_eq!(report["solve"]["map"], map);
    }
    let out = ssncert(&["solve", lasso.to_str().unwrap()]);
    assert_golden("solve-lasso-2d.json", &out.stdout);
}

#[test]
fn reproductions_pass() {
    for ex in ["exam-2-11", "exam-2-12", "exam-4-2", "exam-4-3-cone"] {
        let out = ssncert(&["reproduce", ex]);
        assert_eq!(out.status.code(), Some(0), "{ex}: {}", String::from_utf8_lossy(&out.stderr));
        let report = json(&out);
        assert_eq!(report["reproduce"]["passed"], true, "{ex}");
        assert_eq!(report["provenance"]["input_sha256"].is_null(), ex == "exam-2-11");
    }
    let out = ssncert(&["reproduce", "exam-4-2"]);
    let report = json(&out);
    let cert = &report["reproduce"]["data"]["certify"];
    let status = |id: &str| {
        cert["verdicts"]
            .as_array()
            .unwrap()
            .iter()
            .find(|v| v["id"] == id)
            .map(|v| v["status"].clone())
            .unwrap()
    };
    assert_eq!(status("i"), "certified_false");
    assert_eq!(status("vi_bd"), "certified_true");
    assert_eq!(cert["consensus"]["state"], "expected_divergence");
    assert_golden("reproduce-exam-4-2.json", &out.stdout);
}

#[test]
fn certify_reports_the_expected_divergence_for_the_orthant_example() {
    let file = data("exam-4-2.problem.json");
    let out = ssncert(&["certify", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    let verdicts = report["certify"]["verdicts"].as_array().unwrap();
    let status = |id: &str| verdicts.iter().find(|v| v["id"] == id).unwrap()["status"].clone();
    assert_eq!(status("i"), "certified_false");
    assert_eq!(status("vi_bd"), "certified_true");
    assert_eq!(report["certify"]["consensus"]["state"], "expected_divergence");
    assert!(report["solve"].is_null(), "`at` skips the solve");
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let lasso = data("lasso-2d.problem.json");
    let args = ["certify", lasso.to_str().unwrap(), "--seed", "5"];
    let (a, b) = (ssncert(&args), ssncert(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["provenance"]["seed"], 5);
    assert_eq!(json(&a)["certify"]["consensus"]["state"], "consistent");
}

#[test]
fn seed_can_come_from_the_environment() {
    let cone = data("cone.problem.json");
    let out = Command::new(env!("CARGO_BIN_EXE_ssncert"))
        .args(["probe-smr", cone.to_str().unwrap()])
        .env("SSN_CERTIFY_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["provenance"]["seed"], 11);
    assert_eq!(report["probe"]["id"], "x_smr_nat");
}

#[test]
fn out_flag_writes_the_same_report() {
    let out_path = Path::new(env!("CARGO_TARGET_TMPDIR")).join("exam-2-11.json");
    let out = ssncert(&["reproduce", "exam-2-11", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(fs::read(&out_path).unwrap(), ssncert(&["reproduce", "exam-2-11"]).stdout);
}

#[test]
fn unbounded_problem_does_not_converge() {
    let path = scratch(
        "unbounded.json",
        r#"{"schema_version": 1, "f": {"type": "quadratic", "A": [[0]], "b": [1]}, "phi": {"kind": "zero"}, "tau": 1.0}"#,
    );
    for cmd in ["solve", "certify"] {
        let out = ssncert(&[cmd, path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{cmd}");
        assert_eq!(json(&out)["solve"]["converged"], false);
        assert!(String::from_utf8_lossy(&out.stderr).contains("did not converge"));
    }
}

#[test]
fn input_errors_map_to_distinct_exit_codes() {
    let lasso = fs::read_to_string(data("lasso-2d.problem.json")).unwrap();

    let bad_kind = scratch("bad-kind.json", &lasso.replace("\"l1\"", "\"nuclear_norm\""));
    let out = ssncert(&["solve", bad_kind.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(65));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));

    let bad_tau = scratch("bad-tau.json", &lasso.replace("\"tau\": 1.0", "\"tau\": \"one\""));
    let out = ssncert(&["solve", bad_tau.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(64));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 5") && stderr.contains("`tau`"), "{stderr}");

    let truncated = scratch("truncated.json", &lasso[..lasso.len() / 2]);
    assert_eq!(ssncert(&["solve", truncated.to_str().unwrap()]).status.code(), Some(64));

    assert_eq!(ssncert(&["solve", "/definitely/not/here.json"]).status.code(), Some(66));
    assert_eq!(ssncert(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(ssncert(&["solve", "x.json", "--tol", "-1"]).status.code(), Some(64));
    assert_eq!(ssncert(&["--help"]).status.code(), Some(0));

    let out = ssncert(&["reproduce", "exam-4-2", "--out", "/definitely/not/here/out.json"]);
    assert_eq!(out.status.code(), Some(73));
}

#[test]
fn embedded_problem_files_roundtrip() {
    for name in ["lasso-2d", "cone", "exam-4-2", "exam-2-12"] {
        let text = fs::read_to_string(data(&format!("{name}.problem.json"))).unwrap();
        let parsed = ProblemFile::parse(&text).unwrap();
        let again = ProblemFile::parse(&parsed.to_json()).unwrap();
        assert_eq!(parsed, again, "{name}");
    }
}
