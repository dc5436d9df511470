use std::fs;
use std::path::{Path, PathBuf};

use qsat::cli::{run, EXIT_OK, EXIT_RESOURCE, EXIT_USAGE, EXIT_VERIFY};
use tempfile::TempDir;

const RUNNING: &str = "c running example\np cnf 3 3\n1 0\n-1 2 0\n-1 3 0\n";

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn qsat(args: &[&str]) -> Output {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("qsat").chain(args.iter().copied()).map(String::from).collect();
    let code = run(argv, &mut out, &mut err);
    Output { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn compile_reports_qubits_per_mode() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "f.cnf", RUNNING);
    for (mode, qubits) in [("par", 9), ("seq", 7), ("dist", 15)] {
        let o = qsat(&["compile", s(&f), "--mode", mode]);
        assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
        assert!(o.stderr.contains(&format!("qubits: {qubits}\n")), "{mode}: {}", o.stderr);
        let c = qsat::Circuit::from_json(&o.stdout).unwrap();
        assert_eq!(c.qubit_count(), qubits);
    }
}

#[test]
fn compile_to_file_and_stats_block() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "f.cnf", RUNNING);
    let out = dir.path().join("c.json");
    let o = qsat(&["compile", s(&f), "--mode", "dist", "--iterations", "1", "-o", s(&out)]);
    assert_eq!(o.code, EXIT_OK);
    assert!(o.stdout.is_empty());
    assert!(o.stderr.contains("protocol invocations: 9"));
    assert!(o.stderr.contains("depth iter1/oracle/omega/clauses: 2"));
    assert!(o.stderr.contains("total: 15"));
    assert!(!o.stderr.contains("protocol0/"));
    assert!(qsat::Circuit::from_json(&fs::read_to_string(out).unwrap()).is_ok());
}

#[test]
fn missing_and_malformed_inputs() {
    let dir = TempDir::new().unwrap();
    assert_eq!(qsat(&["compile", "/definitely/missing.cnf"]).code, EXIT_USAGE);
    let bad = write(&dir, "bad.cnf", "p cnf 2 1\n1 x 0\n");
    let o = qsat(&["solve", s(&bad)]);
    assert_eq!(o.code, EXIT_USAGE);
    assert!(o.stderr.contains("line 2"));
    let f = write(&dir, "f.cnf", RUNNING);
    let part = write(&dir, "p.json", r#"{"n1": ["v1"]}"#);
    assert_eq!(qsat(&["compile", s(&f), "--mode", "dist", "--partition", s(&part)]).code, EXIT_USAGE);
}

#[test]
fn fresh_pairs_exceed_the_default_cap() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "f.cnf", RUNNING);
    let o = qsat(&["compile", s(&f), "--mode", "dist", "--iterations", "1", "--no-reuse"]);
    assert_eq!(o.code, EXIT_RESOURCE);
    assert!(o.stderr.contains("37"), "{}", o.stderr);
}

#[test]
fn budget_command_itemizes_pairs() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "f.cnf", RUNNING);
    let o = qsat(&["budget", s(&f), "--no-reuse", "--format", "json"]);
    assert_eq!(o.code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    let pairs: Vec<u64> = v["items"].as_array().unwrap().iter().map(|i| i["pairs"].as_u64().unwrap()).collect();
    assert_eq!(pairs, [2, 3, 3, 2, 2, 2]);
    assert_eq!(v["total"], 37);
}

#[test]
fn solve_exact_csv() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "f.cnf", RUNNING);
    let o = qsat(&["solve", s(&f), "--iterations", "1", "--exact"]);
    assert_eq!(o.code, EXIT_OK);
    let mut lines = o.stdout.lines();
    assert_eq!(lines.next(), Some("bitstring,probability"));
    let last = lines.last().unwrap();
    assert!(last.starts_with("111,0.78125"), "{last}");
}

#[test]
fn solve_json_carries_seed_stats_and_trace() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "f.cnf", RUNNING);
    let trace = dir.path().join("trace.jsonl");
    let o = qsat(&[
        "solve",
        s(&f),
        "--mode",
        "dist",
        "--iterations",
        "1",
        "--shots",
        "64",
        "--seed",
        "7",
        "--format",
        "json",
        "--trace",
        s(&trace),
    ]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let v: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["seed"], 7);
    assert_eq!(v["shots"], 64);
    assert_eq!(v["stats"]["qubits"], 15);
    let total: u64 = v["histogram"].as_object().unwrap().values().map(|c| c.as_u64().unwrap()).sum();
    assert_eq!(total, 64);
    let lines = fs::read_to_string(trace).unwrap();
    assert_eq!(lines.lines().count(), v["trace"].as_array().unwrap().len());
    assert_eq!(lines.lines().count(), 28);
}

#[test]
fn unsat_input_warns_and_stays_uniform() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "u.cnf", "p cnf 2 2\n1 0\n-1 0\n");
    let o = qsat(&["solve", s(&f), "--exact"]);
    assert_eq!(o.code, EXIT_OK);
    assert!(o.stderr.contains("warning: formula is unsatisfiable"));
    for line in o.stdout.lines().skip(1) {
        let p: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((p - 0.25).abs() < 1e-12);
    }
}

#[test]
fn verify_all_modes_pass() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "f.cnf", RUNNING);
    for mode in ["seq", "par", "dist"] {
        let o = qsat(&["verify", s(&f), "--mode", mode, "--trials", "20", "--states", "3", "--seeds", "3"]);
        assert_eq!(o.code, EXIT_OK, "{mode}: {}", o.stdout);
        assert!(o.stdout.trim_end().ends_with("PASS"));
    }
}

#[test]
fn verify_rejects_corrupted_circuit_json() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "f.cnf", RUNNING);
    let truncated = write(&dir, "t.json", "{\"format\": \"qsat-circuit\", ");
    let o = qsat(&["verify", s(&f), "--circuit", s(&truncated), "--trials", "5"]);
    assert_eq!(o.code, EXIT_VERIFY);
    assert!(o.stdout.contains("oracle phases: FAIL"));

    let oracle = qsat::grover::build_oracle(&qsat::grover::QubitLayout::parallel(&qsat::ExpandedFormula::new(
        &qsat::parse_dimacs(RUNNING).unwrap(),
    )))
    .unwrap();
    let good = write(&dir, "good.json", &oracle.to_json());
    assert_eq!(qsat(&["verify", s(&f), "--circuit", s(&good), "--trials", "5"]).code, EXIT_OK);
    let mut doc: serde_json::Value = serde_json::from_str(&oracle.to_json()).unwrap();
    let phase = doc["gates"].as_array_mut().unwrap().iter_mut().find(|g| g["kind"] == "z").unwrap();
    phase["kind"] = "x".into();
    let bad = write(&dir, "bad.json", &doc.to_string());
    assert_eq!(qsat(&["verify", s(&f), "--circuit", s(&bad), "--trials", "5"]).code, EXIT_VERIFY);
}

#[test]
fn solve_output_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "f.cnf", RUNNING);
    let base = ["solve", s(&f), "--iterations", "1", "--shots", "2048", "--seed", "11", "--format", "json"];
    let runs: Vec<String> = ["1", "3", "1"]
        .iter()
        .map(|w| {
            let mut args = base.to_vec();
            args.extend(["--workers", w]);
            qsat(&args).stdout
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
    let other = qsat(&["solve", s(&f), "--iterations", "1", "--shots", "2048", "--seed", "12", "--format", "json"]);
    assert_ne!(runs[0], other.stdout);
}
