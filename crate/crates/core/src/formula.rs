//! CNF formulas, DIMACS ingestion and equivalently expanded formulas.
//!
//! Variables are 0-based internally; DIMACS literals are 1-based and signed.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("clause is empty")]
    EmptyClause,
    #[error("clause contains both {0} and its negation")]
    Tautology(Literal),
    #[error("clause contains literal {0} more than once")]
    DuplicateLiteral(Literal),
    #[error("variable {variable} out of range for a formula over {count} variables")]
    VariableOutOfRange { variable: usize, count: usize },
    #[error("formula has no clauses")]
    NoClauses,
    #[error("assignment has length {got}, expected {expected}")]
    AssignmentLength { expected: usize, got: usize },
}

/// A DIMACS syntax or semantic error, tagged with the 1-based line it was found on.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct DimacsError {
    pub line: usize,
    pub kind: DimacsErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DimacsErrorKind {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("missing `p cnf` header before clauses")]
    MissingHeader,
    #[error("duplicate header")]
    DuplicateHeader,
    #[error("invalid literal token `{0}`")]
    InvalidToken(String),
    #[error("variable {variable} out of range (header declares {declared})")]
    VariableOutOfRange { variable: usize, declared: usize },
    #[error("empty clause")]
    EmptyClause,
    #[error("tautological clause (contains {0} and its negation)")]
    TautologicalClause(i64),
    #[error("clause is not terminated by 0")]
    UnterminatedClause,
    #[error("header declares {declared} clauses but {found} were read")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error("{0}")]
    Formula(FormulaError),
}

/// Non-fatal observation made while reading DIMACS input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimacsWarning {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for DimacsWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub variable: usize,
    pub negated: bool,
}

impl Literal {
    pub fn positive(variable: usize) -> Self {
        Literal { variable, negated: false }
    }

    pub fn negative(variable: usize) -> Self {
        Literal { variable, negated: true }
    }

    /// Converts a signed, 1-based DIMACS literal. Returns `None` for 0.
    pub fn from_dimacs(value: i64) -> Option<Self> {
        if value == 0 {
            return None;
        }
        Some(Literal { variable: (value.unsigned_abs() - 1) as usize, negated: value < 0 })
    }

    pub fn to_dimacs(self) -> i64 {
        let v = self.variable as i64 + 1;
        if self.negated {
            -v
        } else {
            v
        }
    }

    pub fn negate(self) -> Self {
        Literal { negated: !self.negated, ..self }
    }

    pub fn is_satisfied_by(self, value: bool) -> bool {
        value != self.negated
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    /// Builds a clause, rejecting empty, tautological and duplicate-literal input.
    pub fn new(literals: Vec<Literal>) -> Result<Self, FormulaError> {
        if literals.is_empty() {
            return Err(FormulaError::EmptyClause);
        }
        for (i, a) in literals.iter().enumerate() {
            for b in &literals[..i] {
                if a == b {
                    return Err(FormulaError::DuplicateLiteral(*a));
                }
                if a.variable == b.variable {
                    return Err(FormulaError::Tautology(*b));
                }
            }
        }
        Ok(Clause { literals })
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    fn evaluate_unchecked(&self, assignment: &[bool]) -> bool {
        self.literals.iter().any(|l| l.is_satisfied_by(assignment[l.variable]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Formula {
    variable_count: usize,
    clauses: Vec<Clause>,
}

impl Formula {
    pub fn new(variable_count: usize, clauses: Vec<Clause>) -> Result<Self, FormulaError> {
        if clauses.is_empty() {
            return Err(FormulaError::NoClauses);
        }
        for clause in &clauses {
            for lit in clause.literals() {
                if lit.variable >= variable_count {
                    return Err(FormulaError::VariableOutOfRange { variable: lit.variable, count: variable_count });
                }
            }
        }
        Ok(Formula { variable_count, clauses })
    }

    /// Convenience constructor from signed 1-based DIMACS literals.
    pub fn from_dimacs_clauses(variable_count: usize, clauses: &[&[i64]]) -> Result<Self, FormulaError> {
        let clauses = clauses
            .iter()
            .map(|c| Clause::new(c.iter().filter_map(|&v| Literal::from_dimacs(v)).collect()))
            .collect::<Result<Vec<_>, _>>()?;
        Formula::new(variable_count, clauses)
    }

    pub fn variable_count(&self) -> usize {
        self.variable_count
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn clause_count(&self) -> usize {
        self.clauses.len()
    }

    pub fn literal_count(&self) -> usize {
        self.clauses.iter().map(Clause::len).sum()
    }

    pub fn evaluate(&self, assignment: &[bool]) -> Result<bool, FormulaError> {
        if assignment.len() != self.variable_count {
            return Err(FormulaError::AssignmentLength { expected: self.variable_count, got: assignment.len() });
        }
        Ok(self.clauses.iter().all(|c| c.evaluate_unchecked(assignment)))
    }

    /// Canonical DIMACS rendering: header, then one clause per line.
    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.variable_count, self.clauses.len());
        for clause in &self.clauses {
            for lit in clause.literals() {
                out.push_str(&lit.to_dimacs().to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let clauses: Vec<String> = self
            .clauses
            .iter()
            .map(|c| {
                let lits: Vec<String> = c
                    .literals()
                    .iter()
                    .map(|l| if l.negated { format!("!x{}", l.variable + 1) } else { format!("x{}", l.variable + 1) })
                    .collect();
                format!("({})", lits.join(" | "))
            })
            .collect();
        write!(f, "{}", clauses.join(" & "))
    }
}

pub fn parse_dimacs(text: &str) -> Result<Formula, DimacsError> {
    parse_dimacs_with_warnings(text).map(|(f, _)| f)
}

/// Parses DIMACS CNF, returning the formula together with non-fatal warnings
/// (currently: duplicate literals that were dropped from a clause).
pub fn parse_dimacs_with_warnings(text: &str) -> Result<(Formula, Vec<DimacsWarning>), DimacsError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut pending: Vec<Literal> = Vec::new();
    let mut warnings = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('%') {
            // SATLIB end marker.
            break;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(DimacsError { line, kind: DimacsErrorKind::DuplicateHeader });
            }
            header = Some(parse_header(trimmed).map_err(|kind| DimacsError { line, kind })?);
            continue;
        }
        let Some((declared_vars, _)) = header else {
            return Err(DimacsError { line, kind: DimacsErrorKind::MissingHeader });
        };
        for token in trimmed.split_whitespace() {
            let value: i64 = token
                .parse()
                .map_err(|_| DimacsError { line, kind: DimacsErrorKind::InvalidToken(token.to_string()) })?;
            match Literal::from_dimacs(value) {
                Some(lit) => {
                    if lit.variable >= declared_vars {
                        return Err(DimacsError {
                            line,
                            kind: DimacsErrorKind::VariableOutOfRange {
                                variable: lit.variable + 1,
                                declared: declared_vars,
                            },
                        });
                    }
                    pending.push(lit);
                }
                None => {
                    let clause = finish_clause(std::mem::take(&mut pending), line, &mut warnings)?;
                    clauses.push(clause);
                }
            }
        }
    }

    let Some((declared_vars, declared_clauses)) = header else {
        return Err(DimacsError { line: last_line.max(1), kind: DimacsErrorKind::MissingHeader });
    };
    if !pending.is_empty() {
        return Err(DimacsError { line: last_line, kind: DimacsErrorKind::UnterminatedClause });
    }
    if clauses.len() != declared_clauses {
        return Err(DimacsError {
            line: last_line,
            kind: DimacsErrorKind::ClauseCountMismatch { declared: declared_clauses, found: clauses.len() },
        });
    }
    let formula = Formula::new(declared_vars, clauses)
        .map_err(|e| DimacsError { line: last_line, kind: DimacsErrorKind::Formula(e) })?;
    Ok((formula, warnings))
}

fn parse_header(line: &str) -> Result<(usize, usize), DimacsErrorKind> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
        return Err(DimacsErrorKind::MalformedHeader(line.to_string()));
    }
    let vars = parts[2].parse().map_err(|_| DimacsErrorKind::MalformedHeader(line.to_string()))?;
    let clauses = parts[3].parse().map_err(|_| DimacsErrorKind::MalformedHeader(line.to_string()))?;
    Ok((vars, clauses))
}

fn finish_clause(
    literals: Vec<Literal>,
    line: usize,
    warnings: &mut Vec<DimacsWarning>,
) -> Result<Clause, DimacsError> {
    if literals.is_empty() {
        return Err(DimacsError { line, kind: DimacsErrorKind::EmptyClause });
    }
    let mut unique: Vec<Literal> = Vec::with_capacity(literals.len());
    for lit in literals {
        if unique.contains(&lit) {
            warnings.push(DimacsWarning { line, message: format!("duplicate literal {lit} removed from clause") });
            continue;
        }
        if unique.contains(&lit.negate()) {
            return Err(DimacsError { line, kind: DimacsErrorKind::TautologicalClause(lit.to_dimacs().abs()) });
        }
        unique.push(lit);
    }
    Clause::new(unique).map_err(|e| DimacsError { line, kind: DimacsErrorKind::Formula(e) })
}

/// Position of a literal inside a formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Occurrence {
    pub clause: usize,
    pub literal: usize,
}

/// A formula in which every occurrence of a variable gets its own copy.
///
/// Copies are numbered per variable in clause order; copy 0 is the variable
/// itself (the representative). A variable that appears in no clause still
/// owns a single representative copy so the search space keeps `2^d` points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpandedFormula {
    base: Formula,
    occurrences: Vec<Vec<Occurrence>>,
    copy_of_slot: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    expanded_variable_count: usize,
    k_max: usize,
}

impl ExpandedFormula {
    pub fn new(base: &Formula) -> Self {
        let d = base.variable_count();
        let mut occurrences = vec![Vec::new(); d];
        let mut copy_of_slot = Vec::with_capacity(base.clause_count());
        for (ci, clause) in base.clauses().iter().enumerate() {
            let mut row = Vec::with_capacity(clause.len());
            for (li, lit) in clause.literals().iter().enumerate() {
                row.push(occurrences[lit.variable].len());
                occurrences[lit.variable].push(Occurrence { clause: ci, literal: li });
            }
            copy_of_slot.push(row);
        }
        let mut offsets = Vec::with_capacity(d);
        let mut total = 0;
        for occ in &occurrences {
            offsets.push(total);
            total += occ.len().max(1);
        }
        let k_max = occurrences.iter().map(Vec::len).max().unwrap_or(0);
        ExpandedFormula {
            base: base.clone(),
            occurrences,
            copy_of_slot,
            offsets,
            expanded_variable_count: total,
            k_max,
        }
    }

    pub fn base(&self) -> &Formula {
        &self.base
    }

    /// The occurrence list of `variable`, i.e. its expanded copies in order.
    pub fn occurrences(&self, variable: usize) -> &[Occurrence] {
        &self.occurrences[variable]
    }

    /// Number of clauses mentioning `variable` (k_j).
    pub fn occurrence_count(&self, variable: usize) -> usize {
        self.occurrences[variable].len()
    }

    /// Number of qubit copies of `variable`; at least one.
    pub fn copies(&self, variable: usize) -> usize {
        self.occurrences[variable].len().max(1)
    }

    pub fn expanded_variable_count(&self) -> usize {
        self.expanded_variable_count
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Flat index of copy `copy` of `variable`; copies of one variable are contiguous.
    pub fn expanded_index(&self, variable: usize, copy: usize) -> usize {
        debug_assert!(copy < self.copies(variable));
        self.offsets[variable] + copy
    }

    /// Copy number assigned to the literal at `slot`.
    pub fn copy_at(&self, slot: Occurrence) -> usize {
        self.copy_of_slot[slot.clause][slot.literal]
    }

    /// Clause `i` over expanded variables: (flat expanded index, negated) per literal.
    pub fn expanded_clause(&self, clause: usize) -> Vec<(usize, bool)> {
        self.base.clauses()[clause]
            .literals()
            .iter()
            .enumerate()
            .map(|(li, lit)| {
                let copy = self.copy_of_slot[clause][li];
                (self.expanded_index(lit.variable, copy), lit.negated)
            })
            .collect()
    }

    /// Assigns every copy the value of its base variable.
    pub fn lift(&self, assignment: &[bool]) -> Result<Vec<bool>, FormulaError> {
        if assignment.len() != self.base.variable_count() {
            return Err(FormulaError::AssignmentLength { expected: self.base.variable_count(), got: assignment.len() });
        }
        let mut out = Vec::with_capacity(self.expanded_variable_count);
        for (v, &value) in assignment.iter().enumerate() {
            out.extend(std::iter::repeat_n(value, self.copies(v)));
        }
        Ok(out)
    }

    pub fn evaluate_expanded(&self, expanded: &[bool]) -> Result<bool, FormulaError> {
        if expanded.len() != self.expanded_variable_count {
            return Err(FormulaError::AssignmentLength { expected: self.expanded_variable_count, got: expanded.len() });
        }
        Ok((0..self.base.clause_count())
            .all(|ci| self.expanded_clause(ci).into_iter().any(|(idx, negated)| expanded[idx] != negated)))
    }
}

pub fn expand(f: &Formula) -> ExpandedFormula {
    ExpandedFormula::new(f)
}
