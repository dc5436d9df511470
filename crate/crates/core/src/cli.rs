//! `qsat compile | solve | verify | budget`.
//!
//! Exit codes: 0 success, 1 failed verification or internal error,
//! 2 usage or I/O problem, 3 qubit or branch cap exceeded.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::circuit::{Circuit, CircuitError};
use crate::distnet::{
    check_discipline, check_locality, qubit_budget, DistOptions, MessageTrace, Partition, TargetGate,
};
use crate::formula::{parse_dimacs_with_warnings, ExpandedFormula, Formula};
use crate::grover::{Mode, QubitLayout};
use crate::pipeline::{
    compile, diffuser_for_mode, layout_for, oracle_for_mode, CompileOptions, Compiled, PipelineError,
};
use crate::sim::{
    max_qubits_from_env, run_exact, run_shots, run_trajectory, Backend, QuantumState, SimConfig, SimError, SparseState,
};
use crate::verify::{check_diffuser_circuit, check_oracle_phases, check_protocol_equivalence, VerifyError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "qsat",
    version,
    about = "Grover search over CNF formulas with sequential, parallel and distributed oracles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compile a DIMACS formula to circuit JSON; stats go to stderr.
    Compile {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sample or enumerate the search circuit and print the readout histogram.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8192)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Exact distribution by branch enumeration instead of sampling.
        #[arg(long)]
        exact: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Sampling threads; 0 picks the machine default.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
        backend: BackendArg,
        /// Write the classical message trace of one seeded run as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check oracle phases, diffuser equivalence and (distributed) the protocol.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Check this oracle circuit JSON instead of compiling one.
        #[arg(long)]
        circuit: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Random input states per protocol check.
        #[arg(long, default_value_t = 10)]
        states: usize,
        /// Sampled trajectories per input state in protocol checks.
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Itemize EPR pairs and per-node qubits of one distributed iteration.
    Budget {
        input: PathBuf,
        #[arg(long)]
        partition: Option<PathBuf>,
        #[arg(long)]
        no_reuse: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Debug, clap::Args)]
struct Common {
    /// DIMACS CNF file.
    input: PathBuf,
    #[arg(long, default_value = "par", value_parser = parse_mode)]
    mode: Mode,
    /// Override the planned Grover iteration count.
    #[arg(long)]
    iterations: Option<usize>,
    /// Node assignment JSON: {"node": ["label", ...], ...}.
    #[arg(long)]
    partition: Option<PathBuf>,
    /// Allocate a fresh EPR pair for every teleported control.
    #[arg(long)]
    no_reuse: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Auto,
    Dense,
    Sparse,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Auto => Backend::Auto,
            BackendArg::Dense => Backend::Dense,
            BackendArg::Sparse => Backend::Sparse,
        }
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = if e.is_resource() { EXIT_RESOURCE } else { EXIT_VERIFY };
        Failure { code, message: e.to_string() }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = match e {
            SimError::QubitCap { .. } | SimError::BranchCap { .. } => EXIT_RESOURCE,
            _ => EXIT_VERIFY,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<VerifyError> for Failure {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Sim(s) => s.into(),
            other => PipelineError::from(other).into(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

/// Parses `args` (program name first) and runs one command.
pub fn run(args: Vec<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Compile { common, output } => cmd_compile(&common, output.as_deref(), out, err),
        Command::Solve { common, shots, seed, exact, format, workers, backend, trace, output } => {
            let opts = SolveOptions { shots, seed, exact, format, workers, backend, trace, output };
            cmd_solve(&common, &opts, out, err)
        }
        Command::Verify { common, circuit, trials, states, seeds, seed, format } => {
            let opts = VerifyOptions { circuit, trials, states, seeds, seed, format };
            cmd_verify(&common, &opts, out, err)
        }
        Command::Budget { input, partition, no_reuse, format } => {
            cmd_budget(&input, partition.as_deref(), no_reuse, format, out, err)
        }
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_formula(path: &Path, err: &mut dyn Write) -> Result<Formula, Failure> {
    let text = read_text(path)?;
    let (f, warnings) =
        parse_dimacs_with_warnings(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    for w in warnings {
        writeln!(err, "warning: {w}")?;
    }
    Ok(f)
}

fn load_partition(path: Option<&Path>, layout: &QubitLayout) -> Result<Option<Partition>, Failure> {
    path.map(|p| {
        let text = read_text(p)?;
        Partition::from_json(&text, layout.roles()).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))
    })
    .transpose()
}

fn compile_common(common: &Common, err: &mut dyn Write) -> Result<Compiled, Failure> {
    let f = load_formula(&common.input, err)?;
    let mut opts = CompileOptions::new(common.mode, max_qubits_from_env());
    opts.iterations = common.iterations;
    opts.dist.reuse = !common.no_reuse;
    if common.mode == Mode::Distributed {
        opts.partition =
            load_partition(common.partition.as_deref(), &QubitLayout::parallel(&ExpandedFormula::new(&f)))?;
    } else if common.partition.is_some() {
        writeln!(err, "warning: --partition only applies to distributed mode")?;
    }
    let compiled = compile(&f, &opts)?;
    if let Some(d) = &compiled.plan.diagnostic {
        writeln!(err, "warning: {d}")?;
    }
    Ok(compiled)
}

fn is_protocol_segment(name: &str) -> bool {
    name.split('/').any(|part| part.starts_with("protocol"))
}

fn stats(c: &Compiled) -> Result<Value, Failure> {
    let circuit = &c.circuit;
    let depth = |s: Option<&str>| circuit.depth(s).map_err(|e: CircuitError| Failure::usage(e.to_string()));
    let mut segments = serde_json::Map::new();
    for s in circuit.segments().iter().filter(|s| !is_protocol_segment(&s.name)) {
        segments.insert(s.name.clone(), json!(depth(Some(&s.name))?));
    }
    Ok(json!({
        "mode": c.plan.mode.to_string(),
        "qubits": circuit.qubit_count(),
        "classical_bits": circuit.classical_bit_count(),
        "gates": circuit.len(),
        "depth": depth(None)?,
        "iterations": c.plan.iterations,
        "solutions": c.plan.solutions,
        "search_space": c.plan.search_space,
        "protocol_invocations": c.distributed.as_ref().map_or(0, |d| d.invocations.len()),
        "epr_qubits": c.distributed.as_ref().map_or(0, |d| d.epr_qubit_count()),
        "segment_depths": segments,
    }))
}

fn write_stats(s: &Value, err: &mut dyn Write) -> Result<(), Failure> {
    for key in ["mode", "qubits", "classical_bits", "gates", "iterations", "solutions", "depth"] {
        let v = &s[key];
        let text = v.as_str().map_or_else(|| v.to_string(), str::to_string);
        writeln!(err, "{}: {text}", key.replace('_', " "))?;
    }
    if let Some(segments) = s["segment_depths"].as_object() {
        for (name, d) in segments {
            writeln!(err, "  depth {name}: {d}")?;
        }
    }
    if s["mode"] == "distributed" {
        writeln!(err, "protocol invocations: {}", s["protocol_invocations"])?;
        writeln!(err, "epr qubits: {}", s["epr_qubits"])?;
    }
    Ok(())
}

fn emit(text: &str, output: Option<&Path>, out: &mut dyn Write) -> Result<(), Failure> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

fn cmd_compile(
    common: &Common,
    output: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let compiled = compile_common(common, err)?;
    write_stats(&stats(&compiled)?, err)?;
    if let Some(dc) = &compiled.distributed {
        let budget = qubit_budget(&compiled.expanded, &dc.partition, !common.no_reuse).map_err(PipelineError::from)?;
        writeln!(err, "{budget}")?;
    }
    let mut text = compiled.circuit.to_json();
    text.push('\n');
    emit(&text, output, out)?;
    Ok(EXIT_OK)
}

struct SolveOptions {
    shots: u64,
    seed: u64,
    exact: bool,
    format: Format,
    workers: usize,
    backend: BackendArg,
    trace: Option<PathBuf>,
    output: Option<PathBuf>,
}

fn cmd_solve(common: &Common, opts: &SolveOptions, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let compiled = compile_common(common, err)?;
    let s = stats(&compiled)?;
    write_stats(&s, err)?;
    let cfg = SimConfig { backend: opts.backend.into(), workers: opts.workers, ..SimConfig::default() };
    let outcome = if opts.exact {
        run_exact(&compiled.circuit, &compiled.readout, &cfg)?.outcome
    } else {
        run_shots(&compiled.circuit, opts.shots, opts.seed, &compiled.readout, &cfg)?
    };

    let trace = match &compiled.distributed {
        Some(dc) => {
            let initial = SparseState::zero(dc.circuit.qubit_count());
            let (_, bits) = run_trajectory(&dc.circuit, initial, opts.seed, 0, cfg.check_norm)?;
            Some(MessageTrace::from_bits(dc, &bits).map_err(PipelineError::from)?)
        }
        None => None,
    };
    match (&opts.trace, &trace) {
        (Some(path), Some(t)) => emit(&t.to_json_lines(), Some(path), out)?,
        (Some(_), None) => writeln!(err, "warning: --trace only applies to distributed mode")?,
        _ => {}
    }

    let text = match opts.format {
        Format::Json => {
            let mut doc = json!({
                "seed": outcome.seed,
                "shots": outcome.shots,
                "readout": outcome.readout,
                "histogram": outcome.histogram,
                "exact_distribution": outcome.exact_distribution,
                "stats": s,
            });
            if let Some(t) = &trace {
                doc["trace"] = json!(t.events);
            }
            serde_json::to_string_pretty(&doc).expect("json output cannot fail") + "\n"
        }
        _ => outcome.to_csv(),
    };
    emit(&text, opts.output.as_deref(), out)?;
    Ok(EXIT_OK)
}

struct VerifyOptions {
    circuit: Option<PathBuf>,
    trials: usize,
    states: usize,
    seeds: usize,
    seed: u64,
    format: Format,
}

struct Check {
    name: String,
    passed: bool,
    detail: String,
}

fn cmd_verify(common: &Common, opts: &VerifyOptions, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let f = load_formula(&common.input, err)?;
    let expanded = ExpandedFormula::new(&f);
    let layout = layout_for(&expanded, common.mode);
    let partition = match common.mode {
        Mode::Distributed => load_partition(common.partition.as_deref(), &layout)?,
        _ => None,
    };
    let dist = DistOptions { reuse: !common.no_reuse, ..DistOptions::default() };
    let mut checks = Vec::new();

    let oracle = match &opts.circuit {
        Some(path) => {
            let text = read_text(path)?;
            Circuit::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
        }
        None => Ok(oracle_for_mode(&expanded, common.mode, partition.as_ref(), &dist)?),
    };
    let oracle_check = oracle.and_then(|c| {
        if c.qubit_count() < layout.qubit_count() {
            return Err(format!("circuit has {} qubits, layout needs {}", c.qubit_count(), layout.qubit_count()));
        }
        check_oracle_phases(&c, &f, &layout).map_err(|e| e.to_string())
    });
    checks.push(match oracle_check {
        Ok(r) => Check { name: "oracle".into(), passed: r.passed(), detail: r.to_string() },
        Err(e) => Check { name: "oracle".into(), passed: false, detail: format!("oracle phases: FAIL ({e})") },
    });

    let diffuser = diffuser_for_mode(&expanded, common.mode, partition.as_ref(), &dist)?;
    let r = check_diffuser_circuit(&diffuser, &layout, opts.trials, opts.seed)?;
    checks.push(Check { name: "diffuser".into(), passed: r.passed(), detail: r.to_string() });

    if common.mode == Mode::Distributed {
        let max_controls = f.clause_count().clamp(1, 4);
        for m in 1..=max_controls {
            for gate in [TargetGate::X, TargetGate::Z] {
                let r = check_protocol_equivalence(m, gate, opts.states, opts.seeds, opts.seed)?;
                checks.push(Check {
                    name: format!("protocol_m{m}_{gate:?}"),
                    passed: r.passed(),
                    detail: r.to_string(),
                });
            }
        }
        let mut copts = CompileOptions::new(Mode::Distributed, max_qubits_from_env());
        copts.iterations = common.iterations;
        copts.partition = partition.clone();
        copts.dist = dist.clone();
        let compiled = compile(&f, &copts)?;
        let dc = compiled.distributed.as_ref().expect("distributed compile yields a distributed circuit");
        let locality = check_locality(&dc.circuit, &dc.partition, &dc.leases);
        checks.push(Check {
            name: "locality".into(),
            passed: locality.is_clean(),
            detail: format!(
                "locality: {} ({} nonlocal gates)",
                if locality.is_clean() { "PASS" } else { "FAIL" },
                locality.violations.len()
            ),
        });
        let problems = check_discipline(dc, None);
        checks.push(Check {
            name: "discipline".into(),
            passed: problems.is_empty(),
            detail: format!(
                "message discipline: {} ({} invocations, {} problems)",
                if problems.is_empty() { "PASS" } else { "FAIL" },
                dc.invocations.len(),
                problems.len()
            ),
        });
    }

    let passed = checks.iter().all(|c| c.passed);
    let text = match opts.format {
        Format::Json => {
            let doc = json!({
                "mode": common.mode.to_string(),
                "passed": passed,
                "checks": checks.iter().map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail})).collect::<Vec<_>>(),
            });
            serde_json::to_string_pretty(&doc).expect("json output cannot fail") + "\n"
        }
        _ => {
            let mut t: String = checks.iter().map(|c| c.detail.clone() + "\n").collect();
            t.push_str(&format!("verify {}: {}\n", common.mode, if passed { "PASS" } else { "FAIL" }));
            t
        }
    };
    out.write_all(text.as_bytes())?;
    Ok(if passed { EXIT_OK } else { EXIT_VERIFY })
}

fn cmd_budget(
    input: &Path,
    partition: Option<&Path>,
    no_reuse: bool,
    format: Format,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let f = load_formula(input, err)?;
    let expanded = ExpandedFormula::new(&f);
    let layout = QubitLayout::parallel(&expanded);
    let partition = match load_partition(partition, &layout)? {
        Some(p) => p,
        None => Partition::clause_per_node(&layout).map_err(PipelineError::from)?,
    };
    let report = qubit_budget(&expanded, &partition, !no_reuse).map_err(PipelineError::from)?;
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&report).expect("json output cannot fail") + "\n",
        _ => format!("{report}\n"),
    };
    out.write_all(text.as_bytes())?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let argv = std::iter::once("qsat").chain(args.iter().copied()).map(String::from).collect();
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn missing_file_is_usage_error() {
        let (code, _, err) = run_args(&["compile", "/nonexistent/x.cnf"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("error:"));
    }

    #[test]
    fn unknown_flag_and_mode() {
        assert_eq!(run_args(&["solve", "x.cnf", "--bogus"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["solve", "x.cnf", "--mode", "quantum"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn protocol_segments_are_hidden() {
        assert!(is_protocol_segment("iter1/oracle/omega/and/protocol3/step1"));
        assert!(!is_protocol_segment("iter1/oracle/omega/and"));
    }
}
