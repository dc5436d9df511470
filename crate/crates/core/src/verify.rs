//! Classical brute force and the property checkers behind `qsat verify`
//! and the acceptance suite: oracle phases, diffuser equivalence and the
//! teleported-control protocol.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::circuit::Circuit;
use crate::circuit::Gate;
use crate::distnet::{
    build_distributed_mcu, build_local_mcu, check_discipline, DistError, DistOptions, MessageTrace, TargetGate,
};
use crate::formula::{Clause, ExpandedFormula, Formula, Literal};
use crate::grover::{build_parallel_diffuser, GroverError, QubitLayout};
use crate::sim::{run_branches, run_trajectory, QuantumState, SimConfig, SimError, SparseState};

pub const MAX_BRUTE_FORCE_VARIABLES: usize = 24;
/// Amplitude agreement required by the checkers.
pub const TOLERANCE: f64 = 1e-10;
/// Allowed distance of a protocol branch probability from one half.
pub const BRANCH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("{variables} variables exceed the brute-force limit of {MAX_BRUTE_FORCE_VARIABLES}")]
    TooManyVariables { variables: usize },
    #[error("at least one trial is required")]
    NoTrials,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Grover(#[from] GroverError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Assignment number `k` with variable 1 as the most significant bit.
pub fn assignment_of(k: u64, d: usize) -> Vec<bool> {
    (0..d).map(|j| (k >> (d - 1 - j)) & 1 == 1).collect()
}

pub fn render_assignment(a: &[bool]) -> String {
    a.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// All satisfying assignments in ascending order (variable 1 most significant).
pub fn brute_force_solutions(f: &Formula) -> Result<Vec<Vec<bool>>, VerifyError> {
    let d = f.variable_count();
    if d > MAX_BRUTE_FORCE_VARIABLES {
        return Err(VerifyError::TooManyVariables { variables: d });
    }
    Ok((0..1u64 << d)
        .map(|k| assignment_of(k, d))
        .filter(|a| f.evaluate(a).expect("assignment length matches"))
        .collect())
}

pub fn count_solutions(f: &Formula) -> Result<u64, VerifyError> {
    Ok(brute_force_solutions(f)?.len() as u64)
}

/// Basis index of the register state encoding `assignment` on every copy,
/// with all other qubits zero.
fn lifted_index(layout: &QubitLayout, assignment: &[bool]) -> u64 {
    let mut k = 0u64;
    for (v, &value) in assignment.iter().enumerate() {
        if value {
            for &q in layout.variable_qubits(v) {
                k |= 1 << q;
            }
        }
    }
    k
}

/// State `sum_v amps[v] |v...v>` on a register of `width` qubits, where `v`
/// runs over assignments in ascending order.
fn ghz_consistent_state(layout: &QubitLayout, width: usize, amps: &[Complex64]) -> SparseState {
    let d = layout.variable_count();
    SparseState::from_amplitudes(
        width,
        amps.iter().enumerate().map(|(k, &a)| (lifted_index(layout, &assignment_of(k as u64, d)), a)),
    )
}

fn deviation(state: &SparseState, expected: &SparseState, up_to_phase: bool) -> f64 {
    if up_to_phase {
        state.max_abs_diff_up_to_phase(expected)
    } else {
        state.max_abs_diff(expected)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseMismatch {
    pub branch: usize,
    pub assignment: String,
    pub expected_sign: i8,
    pub amplitude_re: f64,
    pub amplitude_im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub assignments: usize,
    pub branches: usize,
    pub max_error: f64,
    /// Probability left on states with a nonzero ancilla or disagreeing copies.
    pub leakage: f64,
    pub mismatches: Vec<PhaseMismatch>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty() && self.max_error < TOLERANCE && self.leakage < TOLERANCE
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "oracle phases: {} ({} assignments, {} branches, max error {:.3e}, leakage {:.3e}, {} mismatches)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.assignments,
            self.branches,
            self.max_error,
            self.leakage,
            self.mismatches.len()
        )
    }
}

/// Runs `oracle` on the uniform GHZ-consistent superposition and checks
/// that every assignment comes back with sign `(-1)^F(v)` and every other
/// qubit (clauses, `F`, EPR halves) back in |0>. Circuits with
/// measurements are checked on every branch, up to a global phase per branch.
pub fn check_oracle_phases(oracle: &Circuit, f: &Formula, layout: &QubitLayout) -> Result<OracleReport, VerifyError> {
    let d = f.variable_count();
    if d > MAX_BRUTE_FORCE_VARIABLES {
        return Err(VerifyError::TooManyVariables { variables: d });
    }
    let n = 1usize << d;
    let amp = Complex64::new((n as f64).sqrt().recip(), 0.0);
    let width = oracle.qubit_count();
    let input = ghz_consistent_state(layout, width, &vec![amp; n]);
    let signs: Vec<f64> = (0..n)
        .map(|k| if f.evaluate(&assignment_of(k as u64, d)).expect("length matches") { -1.0 } else { 1.0 })
        .collect();
    let expected = ghz_consistent_state(layout, width, &signs.iter().map(|&s| amp * s).collect::<Vec<_>>());

    let cfg = SimConfig::default();
    let run = run_branches(oracle, input, &cfg)?;
    let up_to_phase = oracle.has_measurements();
    let mut report = OracleReport {
        assignments: n,
        branches: run.branches.len(),
        max_error: 0.0,
        leakage: 0.0,
        mismatches: Vec::new(),
    };
    for (bi, b) in run.branches.iter().enumerate() {
        report.max_error = report.max_error.max(deviation(&b.state, &expected, up_to_phase));
        let phase = if up_to_phase { alignment(&b.state, &expected) } else { Complex64::new(1.0, 0.0) };
        let mut on_support = 0.0;
        for (k, &sign) in signs.iter().enumerate() {
            let a = assignment_of(k as u64, d);
            let got = b.state.amplitude(lifted_index(layout, &a)) * phase;
            on_support += got.norm_sqr();
            if (got - amp * sign).norm() > TOLERANCE {
                report.mismatches.push(PhaseMismatch {
                    branch: bi,
                    assignment: render_assignment(&a),
                    expected_sign: sign as i8,
                    amplitude_re: got.re,
                    amplitude_im: got.im,
                });
            }
        }
        report.leakage = report.leakage.max((1.0 - on_support).abs());
    }
    Ok(report)
}

fn alignment(state: &SparseState, reference: &SparseState) -> Complex64 {
    let mut inner = Complex64::new(0.0, 0.0);
    state.for_each_nonzero(&mut |k, a| inner += a.conj() * reference.amplitude(k));
    if inner.norm() < 1e-300 {
        Complex64::new(1.0, 0.0)
    } else {
        inner / inner.norm()
    }
}

/// Normalized vector of `n` complex Gaussian amplitudes.
pub fn random_amplitudes(rng: &mut impl Rng, n: usize) -> Vec<Complex64> {
    let raw: Vec<Complex64> =
        (0..n).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    raw.into_iter().map(|a| a / norm).collect()
}

/// Inversion about the mean as the H/X/MCZ/X/H circuit implements it:
/// `a_i - 2 * mean(a)`.
pub fn classic_diffusion(amps: &[Complex64]) -> Vec<Complex64> {
    let mean = amps.iter().sum::<Complex64>() / amps.len() as f64;
    amps.iter().map(|&a| a - 2.0 * mean).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffuserReport {
    pub trials: usize,
    pub max_error: f64,
}

impl DiffuserReport {
    pub fn passed(&self) -> bool {
        self.max_error < TOLERANCE
    }
}

impl fmt::Display for DiffuserReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "diffuser equivalence: {} ({} trials, max error {:.3e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.trials,
            self.max_error
        )
    }
}

/// Applies `diffuser` to random GHZ-consistent states and compares each
/// outcome with inversion about the mean on the underlying `d`-variable
/// amplitudes.
pub fn check_diffuser_circuit(
    diffuser: &Circuit,
    layout: &QubitLayout,
    trials: usize,
    seed: u64,
) -> Result<DiffuserReport, VerifyError> {
    if trials == 0 {
        return Err(VerifyError::NoTrials);
    }
    let d = layout.variable_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SimConfig::default();
    let up_to_phase = diffuser.has_measurements();
    let mut max_error: f64 = 0.0;
    for _ in 0..trials {
        let amps = random_amplitudes(&mut rng, 1 << d);
        let input = ghz_consistent_state(layout, diffuser.qubit_count(), &amps);
        let expected = ghz_consistent_state(layout, diffuser.qubit_count(), &classic_diffusion(&amps));
        for b in run_branches(diffuser, input, &cfg)?.branches {
            max_error = max_error.max(deviation(&b.state, &expected, up_to_phase));
        }
    }
    Ok(DiffuserReport { trials, max_error })
}

/// Parallel diffuser versus the classic diffuser on the representatives.
pub fn check_diffuser_equivalence(
    f: &ExpandedFormula,
    trials: usize,
    seed: u64,
) -> Result<DiffuserReport, VerifyError> {
    let layout = QubitLayout::parallel(f);
    check_diffuser_circuit(&build_parallel_diffuser(&layout)?, &layout, trials, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolReport {
    pub controls: usize,
    pub gate: TargetGate,
    pub states: usize,
    pub seeds: usize,
    /// Largest deviation over all enumerated branches.
    pub branch_error: f64,
    /// Largest deviation over all sampled trajectories.
    pub trajectory_error: f64,
    pub min_branch_probability: f64,
    pub max_branch_probability: f64,
    pub discipline: Vec<String>,
}

impl ProtocolReport {
    pub fn passed(&self) -> bool {
        self.branch_error < TOLERANCE
            && self.trajectory_error < TOLERANCE
            && (self.min_branch_probability - 0.5).abs() < BRANCH_TOLERANCE
            && (self.max_branch_probability - 0.5).abs() < BRANCH_TOLERANCE
            && self.discipline.is_empty()
    }
}

impl fmt::Display for ProtocolReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "protocol m={} U={:?}: {} (branch error {:.3e}, trajectory error {:.3e}, branch p in [{:.12}, {:.12}], {} discipline problems)",
            self.controls,
            self.gate,
            if self.passed() { "PASS" } else { "FAIL" },
            self.branch_error,
            self.trajectory_error,
            self.min_branch_probability,
            self.max_branch_probability,
            self.discipline.len()
        )
    }
}

/// Teleported m-controlled gate versus the direct gate on `states` random
/// inputs. Each input is enumerated over every measurement branch and also
/// sampled along `seeds` trajectories, whose message traces are checked.
pub fn check_protocol_equivalence(
    m: usize,
    gate: TargetGate,
    states: usize,
    seeds: usize,
    seed: u64,
) -> Result<ProtocolReport, VerifyError> {
    if states == 0 {
        return Err(VerifyError::NoTrials);
    }
    let dc = build_distributed_mcu(m, 0, gate, DistOptions::default())?;
    let local = build_local_mcu(m, gate)?;
    let width = dc.circuit.qubit_count();
    let base = m + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SimConfig::default();
    let mut report = ProtocolReport {
        controls: m,
        gate,
        states,
        seeds,
        branch_error: 0.0,
        trajectory_error: 0.0,
        min_branch_probability: 0.5,
        max_branch_probability: 0.5,
        discipline: check_discipline(&dc, None),
    };
    let protocol_measurements: Vec<usize> = dc
        .circuit
        .gates()
        .iter()
        .enumerate()
        .filter(|(_, g)| matches!(g, Gate::MeasureZ { .. } | Gate::MeasureX { .. }))
        .map(|(i, _)| i)
        .collect();

    for trial in 0..states {
        let amps = random_amplitudes(&mut rng, 1 << base);
        let input = SparseState::from_amplitudes(width, amps.iter().enumerate().map(|(k, &a)| (k as u64, a)));
        let mut expected_local =
            SparseState::from_amplitudes(base, amps.iter().enumerate().map(|(k, &a)| (k as u64, a)));
        crate::sim::evolve(&local, &mut expected_local, cfg.check_norm)?;
        let expected = SparseState::from_amplitudes(width, expected_local.entries());

        let run = run_branches(&dc.circuit, input.clone(), &cfg)?;
        for b in &run.branches {
            report.branch_error = report.branch_error.max(b.state.max_abs_diff_up_to_phase(&expected));
        }
        for rec in run.measurements.iter().filter(|r| protocol_measurements.contains(&r.gate)) {
            for &p in &rec.p_one {
                report.min_branch_probability = report.min_branch_probability.min(p);
                report.max_branch_probability = report.max_branch_probability.max(p);
            }
        }
        for s in 0..seeds {
            let (state, bits) =
                run_trajectory(&dc.circuit, input.clone(), seed ^ trial as u64, s as u64, cfg.check_norm)?;
            report.trajectory_error = report.trajectory_error.max(state.max_abs_diff_up_to_phase(&expected));
            let trace = MessageTrace::from_bits(&dc, &bits)?;
            if trace.events.len() != 2 * m {
                report.discipline.push(format!("trajectory {trial}/{s}: {} messages", trace.events.len()));
            }
            report.discipline.extend(check_discipline(&dc, Some(&trace)));
        }
    }
    Ok(report)
}

/// Random CNF with `m` clauses over `d` variables; clause widths are 1 to 3
/// distinct variables with random signs.
pub fn random_formula(rng: &mut impl Rng, d: usize, m: usize) -> Formula {
    let clauses = (0..m)
        .map(|_| {
            let width = rng.random_range(1..=d.min(3));
            let mut vars: Vec<usize> = (0..d).collect();
            for i in 0..width {
                let j = rng.random_range(i..d);
                vars.swap(i, j);
            }
            let lits = vars[..width]
                .iter()
                .map(|&v| if rng.random_bool(0.5) { Literal::negative(v) } else { Literal::positive(v) })
                .collect();
            Clause::new(lits).expect("distinct variables form a valid clause")
        })
        .collect();
    Formula::new(d, clauses).expect("clauses reference declared variables")
}

/// Every formula over 2 variables made of 1 to `max_clauses` distinct
/// non-tautological clauses (there are 8 such clauses).
pub fn two_variable_formulas(max_clauses: usize) -> Vec<Formula> {
    let pool: Vec<Vec<i64>> =
        vec![vec![1], vec![-1], vec![2], vec![-2], vec![1, 2], vec![1, -2], vec![-1, 2], vec![-1, -2]];
    let mut out = Vec::new();
    for mask in 1u32..(1 << pool.len()) {
        if mask.count_ones() as usize > max_clauses {
            continue;
        }
        let chosen: Vec<&[i64]> = (0..pool.len()).filter(|i| mask >> i & 1 == 1).map(|i| pool[i].as_slice()).collect();
        out.push(Formula::from_dimacs_clauses(2, &chosen).expect("pool clauses are valid"));
    }
    out
}
