//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use qsat::cli;
use qsat::distnet::{DistOptions, TargetGate};
use qsat::formula::{Clause, ExpandedFormula, Formula, Literal};
use qsat::grover::{build_oracle, build_parallel_diffuser, build_wrong_diffuser, Mode, QubitLayout};
use qsat::pipeline::{compile, diffuser_for_mode, layout_for, oracle_for_mode, CompileOptions};
use qsat::sim::{run_exact, SimConfig};
use qsat::verify::{
    check_diffuser_circuit, check_oracle_phases, check_protocol_equivalence, random_formula, two_variable_formulas,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

const RUNNING: &str = "c (a) & (!a | b) & (!a | c)\np cnf 3 3\n1 0\n-1 2 0\n-1 3 0\n";
const P_111: f64 = 0.78125;
const EXACT_TOL: f64 = 1e-9;
const AMP_TOL: f64 = 1e-10;
const COUNT_RANGE: (u64, u64) = (6200, 6600);
const CORPUS_MAX_QUBITS: usize = 40;
const MODES: [Mode; 3] = [Mode::Sequential, Mode::Parallel, Mode::Distributed];

struct Criterion {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn qsat(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("qsat").chain(args.iter().copied()).map(String::from).collect();
    let code = cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn csv_value(csv: &str, bits: &str) -> Option<f64> {
    csv.lines().skip(1).find_map(|l| l.strip_prefix(bits)?.strip_prefix(',')?.parse().ok())
}

fn running_formula() -> Formula {
    qsat::parse_dimacs(RUNNING).unwrap()
}

fn random_corpus() -> Vec<Formula> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    (0..60)
        .map(|_| {
            let d = rng.random_range(1..=4);
            let m = rng.random_range(1..=5);
            random_formula(&mut rng, d, m)
        })
        .collect()
}

fn full_corpus() -> Vec<Formula> {
    let mut all = vec![running_formula()];
    all.extend(random_corpus());
    all.extend(two_variable_formulas(5));
    all
}

/// Compiles and runs `qsat solve` on the running example: stats qubits,
/// exact P(111), sampled count(111) and elapsed time.
fn running_example(path: &Path, mode: &str) -> Result<(usize, f64, u64, Duration), String> {
    let p = path.to_str().unwrap();
    let start = Instant::now();
    let (code, _, stats) = qsat(&["compile", p, "--mode", mode, "--iterations", "1"]);
    if code != 0 {
        return Err(format!("compile exited {code}: {stats}"));
    }
    let qubits =
        stats.lines().find_map(|l| l.strip_prefix("qubits: ")?.parse().ok()).ok_or("no qubit count in stats")?;
    let (code, exact, err) = qsat(&["solve", p, "--mode", mode, "--iterations", "1", "--exact"]);
    if code != 0 {
        return Err(format!("exact solve exited {code}: {err}"));
    }
    let (code, sampled, err) =
        qsat(&["solve", p, "--mode", mode, "--iterations", "1", "--shots", "8192", "--seed", "0"]);
    if code != 0 {
        return Err(format!("sampled solve exited {code}: {err}"));
    }
    let p111 = csv_value(&exact, "111").ok_or("111 missing from exact output")?;
    let count = csv_value(&sampled, "111").ok_or("111 missing from histogram")? as u64;
    Ok((qubits, p111, count, start.elapsed()))
}

fn criterion_running(dir: &TempDir, id: u32, mode: &str, qubits_expected: usize, budget: Duration) -> Criterion {
    let path = dir.path().join("running.cnf");
    fs::write(&path, RUNNING).unwrap();
    let name = if mode == "par" { "running example, parallel" } else { "running example, distributed" };
    match running_example(&path, mode) {
        Ok((qubits, p, count, t)) => Criterion {
            id,
            name,
            passed: qubits == qubits_expected
                && (p - P_111).abs() <= EXACT_TOL
                && (COUNT_RANGE.0..=COUNT_RANGE.1).contains(&count)
                && t < budget,
            detail: format!(
                "qubits {qubits} (want {qubits_expected}), P(111) {p:.12} (want {P_111} +- {EXACT_TOL:e}), \
                 count(111) {count} of 8192 (want {}..={}), {:.2} s (limit {} s)",
                COUNT_RANGE.0,
                COUNT_RANGE.1,
                t.as_secs_f64(),
                budget.as_secs()
            ),
        },
        Err(e) => Criterion { id, name, passed: false, detail: e },
    }
}

fn criterion_oracle_phases() -> Criterion {
    let randoms = random_corpus();
    let pairs = two_variable_formulas(5);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let mut checked = 0;
    for (i, f) in randoms.iter().chain(pairs.iter()).enumerate() {
        let e = ExpandedFormula::new(f);
        for mode in MODES {
            let result = oracle_for_mode(&e, mode, None, &DistOptions::default())
                .map_err(|e| e.to_string())
                .and_then(|c| check_oracle_phases(&c, f, &layout_for(&e, mode)).map_err(|e| e.to_string()));
            match result {
                Ok(r) => {
                    worst = worst.max(r.max_error).max(r.leakage);
                    if !r.passed() {
                        failures.push(format!("formula {i} {mode}: {r}"));
                    }
                }
                Err(e) => failures.push(format!("formula {i} {mode}: {e}")),
            }
            checked += 1;
        }
    }
    Criterion {
        id: 3,
        name: "oracle sign and ancilla property",
        passed: failures.is_empty() && worst < AMP_TOL && randoms.len() >= 50,
        detail: format!(
            "{} random + {} two-variable formulas, {checked} oracle checks, max error {worst:.3e}, {} failures{}",
            randoms.len(),
            pairs.len(),
            failures.len(),
            failures.first().map_or(String::new(), |f| format!(" (first: {f})"))
        ),
    }
}

fn criterion_diffuser() -> Criterion {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut formulas = vec![running_formula()];
    while formulas.len() < 11 {
        let d = rng.random_range(2..=4);
        let m = rng.random_range(2..=5);
        formulas.push(random_formula(&mut rng, d, m));
    }
    let mut worst: f64 = 0.0;
    let mut wrong_best = f64::INFINITY;
    let mut wrong_checked = 0;
    let mut problems = Vec::new();
    for (i, f) in formulas.iter().enumerate() {
        let e = ExpandedFormula::new(f);
        let layout = QubitLayout::parallel(&e);
        let seed = 1000 + i as u64;
        match build_parallel_diffuser(&layout).map(|d| check_diffuser_circuit(&d, &layout, 100, seed)) {
            Ok(Ok(r)) => worst = worst.max(r.max_error),
            other => problems.push(format!("formula {i}: {other:?}")),
        }
        // Without a copied variable the wrong construction coincides with the right one.
        if e.k_max() > 1 {
            match build_wrong_diffuser(&layout).map(|d| check_diffuser_circuit(&d, &layout, 100, seed)) {
                Ok(Ok(r)) => {
                    wrong_best = wrong_best.min(r.max_error);
                    wrong_checked += 1;
                }
                other => problems.push(format!("wrong diffuser {i}: {other:?}")),
            }
        }
        for mode in [Mode::Sequential, Mode::Distributed] {
            let l = layout_for(&e, mode);
            let r = diffuser_for_mode(&e, mode, None, &DistOptions::default())
                .map_err(|e| e.to_string())
                .and_then(|d| check_diffuser_circuit(&d, &l, 20, seed).map_err(|e| e.to_string()));
            match r {
                Ok(r) => worst = worst.max(r.max_error),
                Err(e) => problems.push(format!("formula {i} {mode}: {e}")),
            }
        }
    }
    Criterion {
        id: 4,
        name: "parallel diffuser equals classic diffuser",
        passed: problems.is_empty() && worst < AMP_TOL && wrong_checked > 0 && wrong_best > 1e-3,
        detail: format!(
            "{} formulas x 100 trials, max error {worst:.3e}; wrong diffuser on {wrong_checked} formulas, \
             smallest error {wrong_best:.3e} (want > 1e-3){}",
            formulas.len(),
            problems.first().map_or(String::new(), |p| format!("; {p}"))
        ),
    }
}

fn criterion_protocol() -> Criterion {
    let mut lines = Vec::new();
    let mut passed = true;
    let (mut branch, mut traj, mut pmin, mut pmax) = (0.0f64, 0.0f64, 1.0f64, 0.0f64);
    let mut discipline = 0;
    for m in 1..=4 {
        for gate in [TargetGate::X, TargetGate::Z] {
            match check_protocol_equivalence(m, gate, 100, 100, 7 * m as u64) {
                Ok(r) => {
                    passed &= r.passed();
                    branch = branch.max(r.branch_error);
                    traj = traj.max(r.trajectory_error);
                    pmin = pmin.min(r.min_branch_probability);
                    pmax = pmax.max(r.max_branch_probability);
                    discipline += r.discipline.len();
                    if !r.passed() {
                        lines.push(r.to_string());
                    }
                }
                Err(e) => {
                    passed = false;
                    lines.push(format!("m={m} {gate:?}: {e}"));
                }
            }
        }
    }
    Criterion {
        id: 5,
        name: "teleported multi-controlled gate",
        passed,
        detail: format!(
            "m 1..=4, U in {{X, Z}}, 100 states x 100 seeds: branch error {branch:.3e}, trajectory error {traj:.3e}, \
             branch p in [{pmin:.12}, {pmax:.12}], {discipline} discipline problems{}",
            lines.first().map_or(String::new(), |l| format!("; {l}"))
        ),
    }
}

/// Clauses (x1 or x_{i+1}) for i = 1..=m, so x1 appears in every clause.
fn chain_formula(m: usize) -> Formula {
    let clauses = (0..m).map(|i| Clause::new(vec![Literal::positive(0), Literal::positive(i + 1)]).unwrap()).collect();
    Formula::new(m + 1, clauses).unwrap()
}

fn criterion_depth() -> Criterion {
    let mut seq = Vec::new();
    let mut par = Vec::new();
    for m in 2..=10 {
        let f = chain_formula(m);
        let e = ExpandedFormula::new(&f);
        let depth = |layout: QubitLayout| build_oracle(&layout).unwrap().depth(Some("omega/clauses")).unwrap();
        seq.push(depth(QubitLayout::sequential(&f)));
        par.push(depth(QubitLayout::parallel(&e)));
    }
    let increasing = seq.windows(2).all(|w| w[1] > w[0]);
    let constant = par.windows(2).all(|w| w[1] == w[0]);
    Criterion {
        id: 6,
        name: "clause-stage depth, chain formulas m = 2..=10",
        passed: increasing && constant,
        detail: format!(
            "sequential {seq:?} (strictly increasing: {increasing}), parallel {par:?} (constant: {constant})"
        ),
    }
}

fn criterion_mode_equivalence() -> Criterion {
    let corpus = full_corpus();
    // A few corpus formulas need more teleportation qubits than the default cap.
    let cfg = SimConfig { max_qubits: CORPUS_MAX_QUBITS, ..SimConfig::default() };
    let mut worst: f64 = 0.0;
    let mut problems = Vec::new();
    for (i, f) in corpus.iter().enumerate() {
        let mut outcomes = Vec::new();
        for mode in MODES {
            let opts = CompileOptions::new(mode, CORPUS_MAX_QUBITS);
            let r = compile(f, &opts)
                .map_err(|e| e.to_string())
                .and_then(|c| run_exact(&c.circuit, &c.readout, &cfg).map_err(|e| e.to_string()));
            match r {
                Ok(r) => outcomes.push(r.outcome),
                Err(e) => problems.push(format!("formula {i} {mode}: {e}")),
            }
        }
        if outcomes.len() == 3 {
            for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                worst = worst.max(outcomes[a].max_distribution_gap(&outcomes[b]).unwrap_or(f64::INFINITY));
            }
        }
    }
    Criterion {
        id: 7,
        name: "sequential, parallel and distributed distributions agree",
        passed: problems.is_empty() && worst < AMP_TOL,
        detail: format!(
            "{} formulas, max pairwise gap {worst:.3e}{}",
            corpus.len(),
            problems.first().map_or(String::new(), |p| format!("; {p}"))
        ),
    }
}

fn criterion_determinism(dir: &TempDir) -> Criterion {
    let path = dir.path().join("running.cnf");
    fs::write(&path, RUNNING).unwrap();
    let p = path.to_str().unwrap();
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get().max(2)).to_string();
    let mut mismatches = Vec::new();
    let mut runs = 0;
    for mode in ["seq", "par", "dist"] {
        for format in ["csv", "json"] {
            let solve = |w: &str| {
                qsat(&[
                    "solve",
                    p,
                    "--mode",
                    mode,
                    "--shots",
                    "4096",
                    "--seed",
                    "42",
                    "--format",
                    format,
                    "--workers",
                    w,
                ])
                .1
            };
            let outputs = [solve("1"), solve("1"), solve(&workers), solve(&workers)];
            runs += outputs.len();
            if outputs.iter().any(|o| o != &outputs[0] || o.is_empty()) {
                mismatches.push(format!("{mode}/{format}"));
            }
        }
    }
    Criterion {
        id: 8,
        name: "byte-identical solve output",
        passed: mismatches.is_empty(),
        detail: format!("{runs} runs over 3 modes x 2 formats, workers 1 vs {workers}, mismatches {mismatches:?}"),
    }
}

fn main() -> ExitCode {
    let dir = TempDir::new().expect("temporary directory");
    let jobs: Vec<Box<dyn Fn() -> Criterion>> = vec![
        Box::new(|| criterion_running(&dir, 1, "par", 9, Duration::from_secs(5))),
        Box::new(|| criterion_running(&dir, 2, "dist", 15, Duration::from_secs(30))),
        Box::new(criterion_oracle_phases),
        Box::new(criterion_diffuser),
        Box::new(criterion_protocol),
        Box::new(criterion_depth),
        Box::new(criterion_mode_equivalence),
        Box::new(|| criterion_determinism(&dir)),
    ];
    let mut failed = 0;
    for job in &jobs {
        let start = Instant::now();
        let c = job();
        println!(
            "{} criterion {}: {} [{:.2} s] {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            start.elapsed().as_secs_f64(),
            c.detail
        );
        failed += !c.passed as usize;
    }
    println!("acceptance: {} of {} criteria passed", jobs.len() - failed, jobs.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
