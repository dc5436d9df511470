//! Grover circuit construction: qubit layouts, clause blocks, the
//! compute/phase/uncompute oracle, classic and parallel diffusers, and
//! iteration planning.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, Gate, QubitRole};
use crate::formula::{ExpandedFormula, Formula};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroverError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("circuit needs {required} qubits but the cap is {cap}")]
    QubitBudget { required: usize, cap: usize },
    #[error("a diffuser needs at least one qubit")]
    EmptyDiffuser,
    #[error("{0} circuits are built by the distributed compiler")]
    UnsupportedMode(Mode),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sequential,
    Parallel,
    Distributed,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Sequential => "sequential",
            Mode::Parallel => "parallel",
            Mode::Distributed => "distributed",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "seq" | "sequential" => Ok(Mode::Sequential),
            "par" | "parallel" => Ok(Mode::Parallel),
            "dist" | "distributed" => Ok(Mode::Distributed),
            other => Err(format!("unknown mode `{other}` (expected seq, par or dist)")),
        }
    }
}

/// Wire assignment for one formula.
///
/// Qubits are laid out as all copies of variable 1 (representative first),
/// then variable 2, and so on, followed by the clause qubits and `F`.
/// Sequential layouts have exactly one copy per variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QubitLayout {
    expanded: bool,
    variable_qubits: Vec<Vec<usize>>,
    literal_qubits: Vec<Vec<usize>>,
    literal_negated: Vec<Vec<bool>>,
    clause_qubits: Vec<usize>,
    formula_qubit: usize,
    roles: Vec<QubitRole>,
}

impl QubitLayout {
    pub fn sequential(f: &Formula) -> Self {
        let d = f.variable_count();
        let mut roles: Vec<QubitRole> = (0..d).map(|variable| QubitRole::Variable { variable, copy: 0 }).collect();
        let literal_qubits = f.clauses().iter().map(|c| c.literals().iter().map(|l| l.variable).collect()).collect();
        let literal_negated = f.clauses().iter().map(|c| c.literals().iter().map(|l| l.negated).collect()).collect();
        let clause_qubits =
            (0..f.clause_count()).map(|clause| push(&mut roles, QubitRole::Clause { clause })).collect();
        let formula_qubit = push(&mut roles, QubitRole::Formula);
        QubitLayout {
            expanded: false,
            variable_qubits: (0..d).map(|v| vec![v]).collect(),
            literal_qubits,
            literal_negated,
            clause_qubits,
            formula_qubit,
            roles,
        }
    }

    pub fn parallel(f: &ExpandedFormula) -> Self {
        let base = f.base();
        let mut roles = Vec::with_capacity(f.expanded_variable_count() + base.clause_count() + 1);
        let mut variable_qubits = Vec::with_capacity(base.variable_count());
        for variable in 0..base.variable_count() {
            let qubits =
                (0..f.copies(variable)).map(|copy| push(&mut roles, QubitRole::Variable { variable, copy })).collect();
            variable_qubits.push(qubits);
        }
        let literal_qubits =
            (0..base.clause_count()).map(|ci| f.expanded_clause(ci).into_iter().map(|(q, _)| q).collect()).collect();
        let literal_negated = base.clauses().iter().map(|c| c.literals().iter().map(|l| l.negated).collect()).collect();
        let clause_qubits =
            (0..base.clause_count()).map(|clause| push(&mut roles, QubitRole::Clause { clause })).collect();
        let formula_qubit = push(&mut roles, QubitRole::Formula);
        QubitLayout {
            expanded: true,
            variable_qubits,
            literal_qubits,
            literal_negated,
            clause_qubits,
            formula_qubit,
            roles,
        }
    }

    pub fn for_mode(f: &ExpandedFormula, mode: Mode) -> Self {
        match mode {
            Mode::Sequential => QubitLayout::sequential(f.base()),
            Mode::Parallel | Mode::Distributed => QubitLayout::parallel(f),
        }
    }

    pub fn is_expanded(&self) -> bool {
        self.expanded
    }

    pub fn qubit_count(&self) -> usize {
        self.roles.len()
    }

    pub fn roles(&self) -> &[QubitRole] {
        &self.roles
    }

    pub fn variable_count(&self) -> usize {
        self.variable_qubits.len()
    }

    pub fn clause_count(&self) -> usize {
        self.clause_qubits.len()
    }

    /// All copies of `variable`, representative first.
    pub fn variable_qubits(&self, variable: usize) -> &[usize] {
        &self.variable_qubits[variable]
    }

    pub fn representative(&self, variable: usize) -> usize {
        self.variable_qubits[variable][0]
    }

    pub fn companions(&self, variable: usize) -> &[usize] {
        &self.variable_qubits[variable][1..]
    }

    /// Representatives in variable order; this is the readout register.
    pub fn representatives(&self) -> Vec<usize> {
        (0..self.variable_count()).map(|v| self.representative(v)).collect()
    }

    /// Every variable qubit (all copies), in wire order.
    pub fn all_variable_qubits(&self) -> Vec<usize> {
        self.variable_qubits.iter().flatten().copied().collect()
    }

    pub fn literal_qubits(&self, clause: usize) -> &[usize] {
        &self.literal_qubits[clause]
    }

    pub fn literal_negated(&self, clause: usize) -> &[bool] {
        &self.literal_negated[clause]
    }

    pub fn clause_qubit(&self, clause: usize) -> usize {
        self.clause_qubits[clause]
    }

    pub fn clause_qubits(&self) -> &[usize] {
        &self.clause_qubits
    }

    pub fn formula_qubit(&self) -> usize {
        self.formula_qubit
    }

    pub fn ancilla_qubits(&self) -> Vec<usize> {
        let mut out = self.clause_qubits.clone();
        out.push(self.formula_qubit);
        out
    }

    /// An empty circuit over this layout's register.
    pub fn empty_circuit(&self) -> Circuit {
        Circuit::new(self.roles.clone())
    }
}

fn push(roles: &mut Vec<QubitRole>, role: QubitRole) -> usize {
    roles.push(role);
    roles.len() - 1
}

/// X on `target` controlled by `controls`, as CX when there is one control.
pub fn controlled_x(controls: &[usize], target: usize) -> Gate {
    match controls {
        [c] => Gate::CX { control: *c, target },
        _ => Gate::Mcx { controls: controls.to_vec(), target },
    }
}

/// Uniform superposition over assignments, with all copies of a variable
/// tied together in a GHZ state.
pub fn build_ghz_prep(layout: &QubitLayout) -> Result<Circuit, GroverError> {
    let mut c = layout.empty_circuit();
    for v in 0..layout.variable_count() {
        c.append(Gate::H { qubit: layout.representative(v) })?;
        if !layout.companions(v).is_empty() {
            c.append(Gate::Fanout { control: layout.representative(v), targets: layout.companions(v).to_vec() })?;
        }
    }
    Ok(c)
}

/// Gates of the block that sets the clause qubit to the clause value.
///
/// Sequential layouts also restore the literal qubits inside the block.
pub fn clause_gates(layout: &QubitLayout, clause: usize) -> Vec<Gate> {
    let qubits = layout.literal_qubits(clause);
    let flips: Vec<Gate> = qubits
        .iter()
        .zip(layout.literal_negated(clause))
        .filter(|(_, &negated)| !negated)
        .map(|(&qubit, _)| Gate::X { qubit })
        .collect();
    let target = layout.clause_qubit(clause);
    let mut gates = flips.clone();
    gates.push(Gate::X { qubit: target });
    gates.push(controlled_x(qubits, target));
    if !layout.is_expanded() {
        gates.extend(flips);
    }
    gates
}

pub fn build_clause_circuit(layout: &QubitLayout, clause: usize) -> Result<Circuit, GroverError> {
    let mut c = layout.empty_circuit();
    c.extend(clause_gates(layout, clause))?;
    Ok(c)
}

/// The compute half of the oracle: clause blocks then the conjunction onto `F`.
pub fn build_omega(layout: &QubitLayout) -> Result<Circuit, GroverError> {
    let mut c = layout.empty_circuit();
    c.segment_scope("clauses", |c| -> Result<(), GroverError> {
        for i in 0..layout.clause_count() {
            c.extend(clause_gates(layout, i))?;
        }
        Ok(())
    })?;
    c.segment_scope("and", |c| -> Result<(), GroverError> {
        c.append(controlled_x(layout.clause_qubits(), layout.formula_qubit()))?;
        Ok(())
    })?;
    Ok(c)
}

/// Omega, Z on `F`, then the inverse of Omega.
///
/// Segments: `omega`, `omega/clauses`, `omega/and`, `phase`, `omega_inv`,
/// `omega_inv/and`, `omega_inv/clauses`.
pub fn build_oracle(layout: &QubitLayout) -> Result<Circuit, GroverError> {
    let omega = build_omega(layout)?;
    let mut c = layout.empty_circuit();
    c.segment_scope("omega", |c| c.append_circuit(&omega, Some("omega")))?;
    c.segment_scope("phase", |c| c.append(Gate::Z { qubit: layout.formula_qubit() }).map(|_| ()))?;
    c.segment_scope("omega_inv", |c| c.append_circuit(&omega.invert()?, Some("omega_inv")))?;
    Ok(c)
}

/// H, X, multi-controlled Z, X, H over `qubits` on the given register.
pub fn build_classic_diffuser(register: &[QubitRole], qubits: &[usize]) -> Result<Circuit, GroverError> {
    let (&last, rest) = qubits.split_last().ok_or(GroverError::EmptyDiffuser)?;
    let mut c = Circuit::new(register.to_vec());
    c.extend(qubits.iter().map(|&qubit| Gate::H { qubit }))?;
    c.extend(qubits.iter().map(|&qubit| Gate::X { qubit }))?;
    if rest.is_empty() {
        c.append(Gate::Z { qubit: last })?;
    } else {
        c.append(Gate::Mcz { controls: rest.to_vec(), target: last })?;
    }
    c.extend(qubits.iter().map(|&qubit| Gate::X { qubit }))?;
    c.extend(qubits.iter().map(|&qubit| Gate::H { qubit }))?;
    Ok(c)
}

fn fanouts(layout: &QubitLayout) -> Vec<Gate> {
    (0..layout.variable_count())
        .filter(|&v| !layout.companions(v).is_empty())
        .map(|v| Gate::Fanout { control: layout.representative(v), targets: layout.companions(v).to_vec() })
        .collect()
}

/// Disentangle copies, diffuse the representatives, re-entangle.
/// Segments: `disentangle`, `core`, `entangle`.
pub fn build_parallel_diffuser(layout: &QubitLayout) -> Result<Circuit, GroverError> {
    let core = build_classic_diffuser(layout.roles(), &layout.representatives())?;
    let mut c = layout.empty_circuit();
    c.segment_scope("disentangle", |c| c.extend(fanouts(layout)).map(|_| ()))?;
    c.segment_scope("core", |c| c.append_circuit(&core, None))?;
    c.segment_scope("entangle", |c| c.extend(fanouts(layout)).map(|_| ()))?;
    Ok(c)
}

/// The classic diffuser applied to every copy of every variable. It does
/// not preserve the GHZ-consistent subspace and is kept as a negative control.
pub fn build_wrong_diffuser(layout: &QubitLayout) -> Result<Circuit, GroverError> {
    build_classic_diffuser(layout.roles(), &layout.all_variable_qubits())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroverPlan {
    pub search_space: u64,
    pub solutions: u64,
    pub iterations: usize,
    pub mode: Mode,
    pub diagnostic: Option<String>,
}

/// Iteration count floor(pi/4 * sqrt(N/M)), at least 1 when 0 < M < N.
/// An override replaces the formula unless M is 0 or N, which always plan
/// zero iterations.
pub fn plan_iterations(
    search_space: u64,
    solutions: u64,
    override_iterations: Option<usize>,
    mode: Mode,
) -> Result<GroverPlan, GroverError> {
    if !search_space.is_power_of_two() {
        return Err(GroverError::InvalidPlan(format!("search space {search_space} is not a power of two")));
    }
    if solutions > search_space {
        return Err(GroverError::InvalidPlan(format!(
            "{solutions} solutions exceed the search space of {search_space}"
        )));
    }
    let (iterations, diagnostic) = if solutions == 0 {
        (0, Some("formula is unsatisfiable; running zero iterations".to_string()))
    } else if solutions == search_space {
        (0, Some("every assignment satisfies the formula; running zero iterations".to_string()))
    } else {
        let natural = (FRAC_PI_4 * (search_space as f64 / solutions as f64).sqrt()).floor() as usize;
        (override_iterations.unwrap_or(natural.max(1)), None)
    };
    Ok(GroverPlan { search_space, solutions, iterations, mode, diagnostic })
}

/// A compiled search circuit with its readout register.
#[derive(Debug, Clone)]
pub struct GroverCircuit {
    pub circuit: Circuit,
    pub layout: QubitLayout,
    /// Representative qubits in variable order.
    pub readout: Vec<usize>,
}

/// State preparation, `plan.iterations` rounds of oracle and diffuser, and
/// Z measurements of the representatives.
///
/// Segments are named `prep`, `iter{k}/oracle/...`, `iter{k}/diffuser/...`
/// and `measure`, with `k` counting from 1.
pub fn build_grover(f: &ExpandedFormula, plan: &GroverPlan, max_qubits: usize) -> Result<GroverCircuit, GroverError> {
    if plan.mode == Mode::Distributed {
        return Err(GroverError::UnsupportedMode(plan.mode));
    }
    let layout = QubitLayout::for_mode(f, plan.mode);
    if layout.qubit_count() > max_qubits {
        return Err(GroverError::QubitBudget { required: layout.qubit_count(), cap: max_qubits });
    }
    let readout = layout.representatives();
    let prep = match plan.mode {
        Mode::Sequential => {
            let mut c = layout.empty_circuit();
            c.extend(readout.iter().map(|&qubit| Gate::H { qubit }))?;
            c
        }
        _ => build_ghz_prep(&layout)?,
    };
    let oracle = build_oracle(&layout)?;
    let diffuser = match plan.mode {
        Mode::Sequential => build_classic_diffuser(layout.roles(), &readout)?,
        _ => build_parallel_diffuser(&layout)?,
    };

    let mut c = layout.empty_circuit();
    c.segment_scope("prep", |c| c.append_circuit(&prep, None))?;
    for k in 1..=plan.iterations {
        c.segment_scope(&format!("iter{k}/oracle"), |c| c.append_circuit(&oracle, Some(&format!("iter{k}/oracle"))))?;
        c.segment_scope(&format!("iter{k}/diffuser"), |c| {
            c.append_circuit(&diffuser, Some(&format!("iter{k}/diffuser")))
        })?;
    }
    append_readout(&mut c, &readout)?;
    Ok(GroverCircuit { circuit: c, layout, readout })
}

/// Appends a `measure` segment with one Z measurement per readout qubit.
pub fn append_readout(c: &mut Circuit, readout: &[usize]) -> Result<(), CircuitError> {
    c.segment_scope("measure", |c| {
        for &qubit in readout {
            let bit = c.add_bit();
            c.append(Gate::MeasureZ { qubit, bit })?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_dimacs;
    use crate::sim::{statevector_of, QuantumState, SimConfig};

    fn running() -> ExpandedFormula {
        ExpandedFormula::new(&parse_dimacs("p cnf 3 3\n1 0\n-1 2 0\n-1 3 0\n").unwrap())
    }

    #[test]
    fn qubit_counts() {
        let f = running();
        assert_eq!(QubitLayout::parallel(&f).qubit_count(), 9);
        assert_eq!(QubitLayout::sequential(f.base()).qubit_count(), 7);
        let l = QubitLayout::parallel(&f);
        assert_eq!(l.variable_qubits(0), &[0, 1, 2]);
        assert_eq!(l.representatives(), vec![0, 3, 4]);
        assert_eq!(l.clause_qubits(), &[5, 6, 7]);
        assert_eq!(l.formula_qubit(), 8);
    }

    #[test]
    fn clause_blocks_match_the_running_example() {
        let f = running();
        let seq = QubitLayout::sequential(f.base());
        assert_eq!(
            clause_gates(&seq, 0),
            vec![Gate::X { qubit: 0 }, Gate::X { qubit: 3 }, Gate::CX { control: 0, target: 3 }, Gate::X { qubit: 0 }]
        );
        assert_eq!(
            clause_gates(&seq, 1),
            vec![
                Gate::X { qubit: 1 },
                Gate::X { qubit: 4 },
                Gate::Mcx { controls: vec![0, 1], target: 4 },
                Gate::X { qubit: 1 }
            ]
        );
        let par = QubitLayout::parallel(&f);
        assert_eq!(
            clause_gates(&par, 1),
            vec![Gate::X { qubit: 3 }, Gate::X { qubit: 6 }, Gate::Mcx { controls: vec![1, 3], target: 6 }]
        );
    }

    #[test]
    fn inverse_clause_starts_with_mcx() {
        let par = QubitLayout::parallel(&running());
        let inv = build_clause_circuit(&par, 1).unwrap().invert().unwrap();
        assert_eq!(inv.gates()[0], Gate::Mcx { controls: vec![1, 3], target: 6 });
        assert_eq!(inv.gates()[2], Gate::X { qubit: 3 });
    }

    #[test]
    fn clause_qubit_holds_clause_value() {
        let f = ExpandedFormula::new(&Formula::from_dimacs_clauses(3, &[&[1, -2, 3]]).unwrap());
        let l = QubitLayout::parallel(&f);
        let block = build_clause_circuit(&l, 0).unwrap();
        for k in 0..8u64 {
            let mut c = l.empty_circuit();
            c.extend((0..3).filter(|j| (k >> j) & 1 == 1).map(|qubit| Gate::X { qubit })).unwrap();
            c.append_circuit(&block, None).unwrap();
            let s = statevector_of(&c, &SimConfig::default()).unwrap();
            let a = [(k & 1) == 1, (k >> 1) & 1 == 1, (k >> 2) & 1 == 1];
            let expected = a[0] || !a[1] || a[2];
            // positive literals stay flipped until the inverse block runs
            let index = (k ^ 0b101) | ((expected as u64) << l.clause_qubit(0));
            assert!((s.amplitude(index).re - 1.0).abs() < 1e-12, "assignment {k}");
        }
    }

    #[test]
    fn ghz_prep_ties_copies() {
        let f = running();
        let l = QubitLayout::parallel(&f);
        let s = statevector_of(&build_ghz_prep(&l).unwrap(), &SimConfig::default()).unwrap();
        assert_eq!(s.nonzero_count(), 8);
        s.for_each_nonzero(&mut |k, a| {
            assert!((a.re - 8f64.sqrt().recip()).abs() < 1e-12);
            let a_bits = k & 0b111;
            assert!(a_bits == 0 || a_bits == 0b111);
        });
    }

    #[test]
    fn oracle_marks_only_the_solution() {
        let f = running();
        let l = QubitLayout::parallel(&f);
        let mut c = build_ghz_prep(&l).unwrap();
        c.append_circuit(&build_oracle(&l).unwrap(), None).unwrap();
        let s = statevector_of(&c, &SimConfig::default()).unwrap();
        let amp = 8f64.sqrt().recip();
        s.for_each_nonzero(&mut |k, a| {
            let sign = if k == 0b11111 { -1.0 } else { 1.0 };
            assert!((a.re - sign * amp).abs() < 1e-12, "basis {k:b}");
        });
        assert_eq!(s.nonzero_count(), 8);
    }

    #[test]
    fn diffuser_shapes() {
        let roles = vec![QubitRole::Control { index: 0 }];
        let one = build_classic_diffuser(&roles, &[0]).unwrap();
        assert_eq!(
            one.gates(),
            &[
                Gate::H { qubit: 0 },
                Gate::X { qubit: 0 },
                Gate::Z { qubit: 0 },
                Gate::X { qubit: 0 },
                Gate::H { qubit: 0 }
            ]
        );
        assert!(matches!(build_classic_diffuser(&roles, &[]), Err(GroverError::EmptyDiffuser)));

        let l = QubitLayout::parallel(&running());
        let d = build_parallel_diffuser(&l).unwrap();
        assert_eq!(d.gates()[0], Gate::Fanout { control: 0, targets: vec![1, 2] });
        assert_eq!(d.gates()[7], Gate::Mcz { controls: vec![0, 3], target: 4 });
        assert_eq!(d.gates().last().unwrap(), &Gate::Fanout { control: 0, targets: vec![1, 2] });
        assert_eq!(d.len(), 15);
    }

    #[test]
    fn parallel_diffuser_without_sharing_is_classic() {
        let f = ExpandedFormula::new(&Formula::from_dimacs_clauses(2, &[&[1, 2]]).unwrap());
        let l = QubitLayout::parallel(&f);
        let d = build_parallel_diffuser(&l).unwrap();
        assert_eq!(d.gates(), build_classic_diffuser(l.roles(), &l.representatives()).unwrap().gates());
    }

    #[test]
    fn plans() {
        assert_eq!(plan_iterations(8, 1, None, Mode::Parallel).unwrap().iterations, 2);
        assert_eq!(plan_iterations(8, 1, Some(1), Mode::Parallel).unwrap().iterations, 1);
        assert_eq!(plan_iterations(8, 4, None, Mode::Parallel).unwrap().iterations, 1);
        let unsat = plan_iterations(8, 0, Some(3), Mode::Parallel).unwrap();
        assert_eq!(unsat.iterations, 0);
        assert!(unsat.diagnostic.is_some());
        assert_eq!(plan_iterations(8, 8, None, Mode::Parallel).unwrap().iterations, 0);
        assert!(plan_iterations(6, 1, None, Mode::Parallel).is_err());
        assert!(plan_iterations(8, 9, None, Mode::Parallel).is_err());
    }

    #[test]
    fn grover_circuit_sizes_and_budget() {
        let f = running();
        let plan = plan_iterations(8, 1, Some(1), Mode::Parallel).unwrap();
        let g = build_grover(&f, &plan, 26).unwrap();
        assert_eq!(g.circuit.qubit_count(), 9);
        assert_eq!(g.readout, vec![0, 3, 4]);
        let seq = GroverPlan { mode: Mode::Sequential, ..plan.clone() };
        assert_eq!(build_grover(&f, &seq, 26).unwrap().circuit.qubit_count(), 7);
        assert!(matches!(build_grover(&f, &plan, 8), Err(GroverError::QubitBudget { required: 9, cap: 8 })));
        let dist = GroverPlan { mode: Mode::Distributed, ..plan };
        assert!(matches!(build_grover(&f, &dist, 26), Err(GroverError::UnsupportedMode(_))));
    }
}
