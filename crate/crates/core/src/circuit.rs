//! Gate-level circuit IR with classical bits, named segments, inversion,
//! ASAP depth and a versioned JSON form.
//!
//! Multi-controlled gates are primitive; nothing here decomposes them.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_NAME: &str = "qsat-circuit";
pub const FORMAT_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CircuitError {
    #[error("gate {gate}: qubit {qubit} out of range ({count} qubits)")]
    QubitOutOfRange { gate: usize, qubit: usize, count: usize },
    #[error("gate {gate}: qubit {qubit} used more than once")]
    DuplicateOperand { gate: usize, qubit: usize },
    #[error("gate {gate}: classical bit {bit} out of range ({count} bits)")]
    BitOutOfRange { gate: usize, bit: usize, count: usize },
    #[error("gate {gate}: classical bit {bit} read before it is written")]
    ReadBeforeWrite { gate: usize, bit: usize },
    #[error("gate {gate}: classical bit {bit} written twice")]
    BitRewritten { gate: usize, bit: usize },
    #[error("gate {gate}: {kind} needs at least one {what}")]
    MissingOperands { gate: usize, kind: &'static str, what: &'static str },
    #[error("gate {gate} ({kind}) is not unitary and cannot be inverted")]
    NotInvertible { gate: usize, kind: &'static str },
    #[error("unknown segment `{0}`")]
    UnknownSegment(String),
    #[error("segment `{0}` already exists")]
    DuplicateSegment(String),
    #[error("invalid segment `{name}` range {start}..{end}")]
    BadSegment { name: String, start: usize, end: usize },
    #[error("circuits have different qubit registers")]
    RegisterMismatch,
    #[error("malformed circuit document: {0}")]
    Document(String),
}

/// What a wire stands for.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QubitRole {
    /// Copy `copy` of a formula variable (copy 0 is the representative).
    Variable {
        variable: usize,
        copy: usize,
    },
    Clause {
        clause: usize,
    },
    Formula,
    /// Pool slot used for one half of an EPR pair.
    Epr {
        slot: usize,
    },
    Control {
        index: usize,
    },
    Target,
}

impl QubitRole {
    pub fn label(&self) -> String {
        match self {
            QubitRole::Variable { variable, copy: 0 } => format!("v{}", variable + 1),
            QubitRole::Variable { variable, copy } => format!("v{}[e{}]", variable + 1, copy + 1),
            QubitRole::Clause { clause } => format!("C{}", clause + 1),
            QubitRole::Formula => "F".to_string(),
            QubitRole::Epr { slot } => format!("epr{}", slot + 1),
            QubitRole::Control { index } => format!("c{}", index + 1),
            QubitRole::Target => "t".to_string(),
        }
    }
}

impl fmt::Display for QubitRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gate {
    X {
        qubit: usize,
    },
    H {
        qubit: usize,
    },
    Z {
        qubit: usize,
    },
    #[serde(rename = "cx")]
    CX {
        control: usize,
        target: usize,
    },
    #[serde(rename = "mcx")]
    Mcx {
        controls: Vec<usize>,
        target: usize,
    },
    #[serde(rename = "mcz")]
    Mcz {
        controls: Vec<usize>,
        target: usize,
    },
    /// One control, many CNOT targets.
    Fanout {
        control: usize,
        targets: Vec<usize>,
    },
    MeasureZ {
        qubit: usize,
        bit: usize,
    },
    /// Measurement in the |+>/|-> basis; outcome 0 leaves |+>, 1 leaves |->.
    MeasureX {
        qubit: usize,
        bit: usize,
    },
    #[serde(rename = "cond_x")]
    CondX {
        qubit: usize,
        bit: usize,
    },
    #[serde(rename = "cond_z")]
    CondZ {
        qubit: usize,
        bit: usize,
    },
    Reset {
        qubit: usize,
    },
}

impl Gate {
    pub fn name(&self) -> &'static str {
        match self {
            Gate::X { .. } => "x",
            Gate::H { .. } => "h",
            Gate::Z { .. } => "z",
            Gate::CX { .. } => "cx",
            Gate::Mcx { .. } => "mcx",
            Gate::Mcz { .. } => "mcz",
            Gate::Fanout { .. } => "fanout",
            Gate::MeasureZ { .. } => "measure_z",
            Gate::MeasureX { .. } => "measure_x",
            Gate::CondX { .. } => "cond_x",
            Gate::CondZ { .. } => "cond_z",
            Gate::Reset { .. } => "reset",
        }
    }

    /// All qubit operands in a fixed order (controls before targets).
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::X { qubit }
            | Gate::H { qubit }
            | Gate::Z { qubit }
            | Gate::MeasureZ { qubit, .. }
            | Gate::MeasureX { qubit, .. }
            | Gate::CondX { qubit, .. }
            | Gate::CondZ { qubit, .. }
            | Gate::Reset { qubit } => vec![*qubit],
            Gate::CX { control, target } => vec![*control, *target],
            Gate::Mcx { controls, target } | Gate::Mcz { controls, target } => {
                let mut q = controls.clone();
                q.push(*target);
                q
            }
            Gate::Fanout { control, targets } => {
                let mut q = vec![*control];
                q.extend(targets);
                q
            }
        }
    }

    pub fn bit_written(&self) -> Option<usize> {
        match self {
            Gate::MeasureZ { bit, .. } | Gate::MeasureX { bit, .. } => Some(*bit),
            _ => None,
        }
    }

    pub fn bit_read(&self) -> Option<usize> {
        match self {
            Gate::CondX { bit, .. } | Gate::CondZ { bit, .. } => Some(*bit),
            _ => None,
        }
    }

    /// True for the gates that act as a fixed unitary. All of them are self-inverse.
    pub fn is_unitary(&self) -> bool {
        !matches!(
            self,
            Gate::MeasureZ { .. }
                | Gate::MeasureX { .. }
                | Gate::CondX { .. }
                | Gate::CondZ { .. }
                | Gate::Reset { .. }
        )
    }

    pub fn is_measurement(&self) -> bool {
        matches!(self, Gate::MeasureZ { .. } | Gate::MeasureX { .. } | Gate::Reset { .. })
    }

    /// Applies `f` to every qubit operand.
    pub fn map_qubits(&self, f: impl Fn(usize) -> usize) -> Gate {
        match self {
            Gate::X { qubit } => Gate::X { qubit: f(*qubit) },
            Gate::H { qubit } => Gate::H { qubit: f(*qubit) },
            Gate::Z { qubit } => Gate::Z { qubit: f(*qubit) },
            Gate::CX { control, target } => Gate::CX { control: f(*control), target: f(*target) },
            Gate::Mcx { controls, target } => {
                Gate::Mcx { controls: controls.iter().map(|&q| f(q)).collect(), target: f(*target) }
            }
            Gate::Mcz { controls, target } => {
                Gate::Mcz { controls: controls.iter().map(|&q| f(q)).collect(), target: f(*target) }
            }
            Gate::Fanout { control, targets } => {
                Gate::Fanout { control: f(*control), targets: targets.iter().map(|&q| f(q)).collect() }
            }
            Gate::MeasureZ { qubit, bit } => Gate::MeasureZ { qubit: f(*qubit), bit: *bit },
            Gate::MeasureX { qubit, bit } => Gate::MeasureX { qubit: f(*qubit), bit: *bit },
            Gate::CondX { qubit, bit } => Gate::CondX { qubit: f(*qubit), bit: *bit },
            Gate::CondZ { qubit, bit } => Gate::CondZ { qubit: f(*qubit), bit: *bit },
            Gate::Reset { qubit } => Gate::Reset { qubit: f(*qubit) },
        }
    }

    fn map_bit(&self, f: impl Fn(usize) -> usize) -> Gate {
        match self {
            Gate::MeasureZ { qubit, bit } => Gate::MeasureZ { qubit: *qubit, bit: f(*bit) },
            Gate::MeasureX { qubit, bit } => Gate::MeasureX { qubit: *qubit, bit: f(*bit) },
            Gate::CondX { qubit, bit } => Gate::CondX { qubit: *qubit, bit: f(*bit) },
            Gate::CondZ { qubit, bit } => Gate::CondZ { qubit: *qubit, bit: f(*bit) },
            other => other.clone(),
        }
    }
}

/// A named half-open range of gate indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    qubits: Vec<QubitRole>,
    classical_bits: usize,
    gates: Vec<Gate>,
    segments: Vec<Segment>,
    written: Vec<bool>,
}

impl Circuit {
    pub fn new(qubits: Vec<QubitRole>) -> Self {
        Circuit { qubits, classical_bits: 0, gates: Vec::new(), segments: Vec::new(), written: Vec::new() }
    }

    /// A circuit over `n` anonymous control wires (`c1`..`cn`).
    pub fn with_width(n: usize) -> Self {
        Circuit::new((0..n).map(|index| QubitRole::Control { index }).collect())
    }

    pub fn qubit_count(&self) -> usize {
        self.qubits.len()
    }

    pub fn qubits(&self) -> &[QubitRole] {
        &self.qubits
    }

    pub fn role(&self, qubit: usize) -> &QubitRole {
        &self.qubits[qubit]
    }

    pub fn find_qubit(&self, role: &QubitRole) -> Option<usize> {
        self.qubits.iter().position(|r| r == role)
    }

    pub fn classical_bit_count(&self) -> usize {
        self.classical_bits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    pub fn add_qubit(&mut self, role: QubitRole) -> usize {
        self.qubits.push(role);
        self.qubits.len() - 1
    }

    pub fn add_bit(&mut self) -> usize {
        self.classical_bits += 1;
        self.written.push(false);
        self.classical_bits - 1
    }

    pub fn has_measurements(&self) -> bool {
        self.gates.iter().any(|g| !g.is_unitary())
    }

    pub fn append(&mut self, gate: Gate) -> Result<&mut Self, CircuitError> {
        let index = self.gates.len();
        self.validate(index, &gate)?;
        if let Some(bit) = gate.bit_written() {
            self.written[bit] = true;
        }
        self.gates.push(gate);
        Ok(self)
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<&mut Self, CircuitError> {
        for g in gates {
            self.append(g)?;
        }
        Ok(self)
    }

    fn validate(&self, index: usize, gate: &Gate) -> Result<(), CircuitError> {
        let missing = |what| CircuitError::MissingOperands { gate: index, kind: gate.name(), what };
        match gate {
            Gate::Mcx { controls, .. } | Gate::Mcz { controls, .. } if controls.is_empty() => {
                return Err(missing("control"))
            }
            Gate::Fanout { targets, .. } if targets.is_empty() => return Err(missing("target")),
            _ => {}
        }
        let mut seen = BTreeSet::new();
        for q in gate.qubits() {
            if q >= self.qubits.len() {
                return Err(CircuitError::QubitOutOfRange { gate: index, qubit: q, count: self.qubits.len() });
            }
            if !seen.insert(q) {
                return Err(CircuitError::DuplicateOperand { gate: index, qubit: q });
            }
        }
        let bit_range = |bit: usize| {
            if bit >= self.classical_bits {
                Err(CircuitError::BitOutOfRange { gate: index, bit, count: self.classical_bits })
            } else {
                Ok(())
            }
        };
        if let Some(bit) = gate.bit_read() {
            bit_range(bit)?;
            if !self.written[bit] {
                return Err(CircuitError::ReadBeforeWrite { gate: index, bit });
            }
        }
        if let Some(bit) = gate.bit_written() {
            bit_range(bit)?;
            if self.written[bit] {
                return Err(CircuitError::BitRewritten { gate: index, bit });
            }
        }
        Ok(())
    }

    /// Runs `body` and records the gates it appends as segment `name`.
    pub fn segment_scope<T, E>(&mut self, name: &str, body: impl FnOnce(&mut Circuit) -> Result<T, E>) -> Result<T, E>
    where
        E: From<CircuitError>,
    {
        if self.segment(name).is_some() {
            return Err(CircuitError::DuplicateSegment(name.to_string()).into());
        }
        let start = self.gates.len();
        let out = body(self)?;
        let end = self.gates.len();
        self.segments.push(Segment { name: name.to_string(), start, end });
        Ok(out)
    }

    pub fn add_segment(&mut self, name: &str, start: usize, end: usize) -> Result<(), CircuitError> {
        if start > end || end > self.gates.len() {
            return Err(CircuitError::BadSegment { name: name.to_string(), start, end });
        }
        if self.segment(name).is_some() {
            return Err(CircuitError::DuplicateSegment(name.to_string()));
        }
        self.segments.push(Segment { name: name.to_string(), start, end });
        Ok(())
    }

    /// Appends `other` (over the same qubit register or a prefix of it).
    /// Classical bits of `other` are renumbered after ours; its segments are
    /// copied with names prefixed by `prefix/` when a prefix is given.
    pub fn append_circuit(&mut self, other: &Circuit, prefix: Option<&str>) -> Result<(), CircuitError> {
        if other.qubits.len() > self.qubits.len() || other.qubits[..] != self.qubits[..other.qubits.len()] {
            return Err(CircuitError::RegisterMismatch);
        }
        let bit_offset = self.classical_bits;
        for _ in 0..other.classical_bits {
            self.add_bit();
        }
        let gate_offset = self.gates.len();
        for g in &other.gates {
            self.append(g.map_bit(|b| b + bit_offset))?;
        }
        for s in &other.segments {
            let name = match prefix {
                Some(p) => format!("{p}/{}", s.name),
                None => s.name.clone(),
            };
            self.add_segment(&name, s.start + gate_offset, s.end + gate_offset)?;
        }
        Ok(())
    }

    /// The inverse circuit. Every unitary gate here is self-inverse, so this
    /// reverses the gate order; segments are mirrored onto the reversed range.
    pub fn invert(&self) -> Result<Circuit, CircuitError> {
        if let Some((gate, g)) = self.gates.iter().enumerate().find(|(_, g)| !g.is_unitary()) {
            return Err(CircuitError::NotInvertible { gate, kind: g.name() });
        }
        let n = self.gates.len();
        let mut out = Circuit::new(self.qubits.clone());
        out.gates = self.gates.iter().rev().cloned().collect();
        out.segments = self
            .segments
            .iter()
            .map(|s| Segment { name: s.name.clone(), start: n - s.end, end: n - s.start })
            .collect();
        Ok(out)
    }

    /// ASAP depth: each gate lands one layer after the latest gate sharing
    /// any qubit or classical bit with it.
    pub fn depth(&self, segment: Option<&str>) -> Result<usize, CircuitError> {
        let (start, end) = match segment {
            None => (0, self.gates.len()),
            Some(name) => {
                let s = self.segment(name).ok_or_else(|| CircuitError::UnknownSegment(name.to_string()))?;
                (s.start, s.end)
            }
        };
        Ok(asap_layers(&self.gates[start..end], self.qubits.len(), self.classical_bits).into_iter().max().unwrap_or(0))
    }

    /// Layer index (1-based) of every gate under ASAP scheduling.
    pub fn layers(&self) -> Vec<usize> {
        asap_layers(&self.gates, self.qubits.len(), self.classical_bits)
    }

    /// Renames wires through the permutation `perm` (old index -> new index).
    pub fn permute_qubits(&self, perm: &[usize]) -> Circuit {
        let mut qubits = self.qubits.clone();
        for (old, &new) in perm.iter().enumerate() {
            qubits[new] = self.qubits[old].clone();
        }
        Circuit {
            qubits,
            classical_bits: self.classical_bits,
            gates: self.gates.iter().map(|g| g.map_qubits(|q| perm[q])).collect(),
            segments: self.segments.clone(),
            written: self.written.clone(),
        }
    }

    /// Human-readable listing, one gate per line.
    pub fn disassemble(&self) -> String {
        let label = |q: usize| self.qubits[q].label();
        let labels = |qs: &[usize]| qs.iter().map(|&q| label(q)).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        for (i, g) in self.gates.iter().enumerate() {
            let body = match g {
                Gate::X { qubit } | Gate::H { qubit } | Gate::Z { qubit } | Gate::Reset { qubit } => label(*qubit),
                Gate::CX { control, target } => format!("{} -> {}", label(*control), label(*target)),
                Gate::Mcx { controls, target } | Gate::Mcz { controls, target } => {
                    format!("{} -> {}", labels(controls), label(*target))
                }
                Gate::Fanout { control, targets } => format!("{} -> {}", label(*control), labels(targets)),
                Gate::MeasureZ { qubit, bit } | Gate::MeasureX { qubit, bit } => {
                    format!("{} -> b{}", label(*qubit), bit)
                }
                Gate::CondX { qubit, bit } | Gate::CondZ { qubit, bit } => format!("{} if b{}", label(*qubit), bit),
            };
            out.push_str(&format!("{i:4} {:<9} {body}\n", g.name()));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let doc = CircuitDoc {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION.to_string(),
            qubits: self
                .qubits
                .iter()
                .enumerate()
                .map(|(index, role)| QubitDoc { index, label: role.label(), role: role.clone() })
                .collect(),
            classical_bits: self.classical_bits,
            gates: self.gates.clone(),
            segments: self.segments.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("circuit serialization cannot fail")
    }

    /// Parses and fully re-validates a circuit document.
    pub fn from_json(text: &str) -> Result<Circuit, CircuitError> {
        let doc: CircuitDoc = serde_json::from_str(text).map_err(|e| CircuitError::Document(e.to_string()))?;
        if doc.format != FORMAT_NAME || doc.version != FORMAT_VERSION {
            return Err(CircuitError::Document(format!("unsupported format {}/{}", doc.format, doc.version)));
        }
        let mut qubits = Vec::with_capacity(doc.qubits.len());
        for (i, q) in doc.qubits.into_iter().enumerate() {
            if q.index != i {
                return Err(CircuitError::Document(format!("qubit entry {i} has index {}", q.index)));
            }
            if q.label != q.role.label() {
                return Err(CircuitError::Document(format!("qubit {i} label `{}` does not match its role", q.label)));
            }
            qubits.push(q.role);
        }
        let mut c = Circuit::new(qubits);
        for _ in 0..doc.classical_bits {
            c.add_bit();
        }
        c.extend(doc.gates)?;
        for s in doc.segments {
            c.add_segment(&s.name, s.start, s.end)?;
        }
        Ok(c)
    }
}

fn asap_layers(gates: &[Gate], qubits: usize, bits: usize) -> Vec<usize> {
    let mut qubit_free = vec![0usize; qubits];
    let mut bit_free = vec![0usize; bits];
    let mut layers = Vec::with_capacity(gates.len());
    for g in gates {
        let qs = g.qubits();
        let bs: Vec<usize> = g.bit_read().into_iter().chain(g.bit_written()).collect();
        let layer = 1 + qs.iter().map(|&q| qubit_free[q]).chain(bs.iter().map(|&b| bit_free[b])).max().unwrap_or(0);
        for &q in &qs {
            qubit_free[q] = layer;
        }
        for &b in &bs {
            bit_free[b] = layer;
        }
        layers.push(layer);
    }
    layers
}

#[derive(Serialize, Deserialize)]
struct CircuitDoc {
    format: String,
    version: String,
    qubits: Vec<QubitDoc>,
    classical_bits: usize,
    gates: Vec<Gate>,
    segments: Vec<Segment>,
}

#[derive(Serialize, Deserialize)]
struct QubitDoc {
    index: usize,
    label: String,
    role: QubitRole,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn append_single_gate() {
        let mut c = Circuit::with_width(1);
        c.append(Gate::X { qubit: 0 }).unwrap();
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn append_rejects_bad_operands() {
        let mut c = Circuit::with_width(3);
        assert!(matches!(
            c.append(Gate::Mcx { controls: vec![0, 1], target: 1 }),
            Err(CircuitError::DuplicateOperand { qubit: 1, .. })
        ));
        assert!(matches!(c.append(Gate::X { qubit: 3 }), Err(CircuitError::QubitOutOfRange { qubit: 3, .. })));
        assert!(matches!(
            c.append(Gate::Mcx { controls: vec![], target: 1 }),
            Err(CircuitError::MissingOperands { .. })
        ));
        assert!(c.is_empty());
    }

    #[test]
    fn classical_bits_written_once_before_read() {
        let mut c = Circuit::with_width(2);
        let b = c.add_bit();
        assert!(matches!(c.append(Gate::CondZ { qubit: 0, bit: b }), Err(CircuitError::ReadBeforeWrite { .. })));
        c.append(Gate::MeasureZ { qubit: 1, bit: b }).unwrap();
        c.append(Gate::CondZ { qubit: 0, bit: b }).unwrap();
        assert!(matches!(c.append(Gate::MeasureX { qubit: 1, bit: b }), Err(CircuitError::BitRewritten { .. })));
        assert!(matches!(c.append(Gate::CondX { qubit: 0, bit: 7 }), Err(CircuitError::BitOutOfRange { .. })));
    }

    #[test]
    fn invert_reverses_and_mirrors_segments() {
        let mut c = Circuit::with_width(3);
        c.segment_scope("m", |c| c.extend([Gate::X { qubit: 0 }, Gate::X { qubit: 2 }]).map(|_| ())).unwrap();
        c.segment_scope("and", |c| c.append(Gate::Mcx { controls: vec![0, 1], target: 2 }).map(|_| ())).unwrap();
        let inv = c.invert().unwrap();
        assert_eq!(inv.gates()[0], Gate::Mcx { controls: vec![0, 1], target: 2 });
        assert_eq!(inv.gates()[2], Gate::X { qubit: 0 });
        assert_eq!(inv.segment("and").unwrap(), &Segment { name: "and".into(), start: 0, end: 1 });
        assert_eq!(inv.segment("m").unwrap(), &Segment { name: "m".into(), start: 1, end: 3 });
        assert_eq!(inv.invert().unwrap(), c);
        assert!(Circuit::with_width(1).invert().unwrap().is_empty());
    }

    #[test]
    fn invert_rejects_measurement() {
        let mut c = Circuit::with_width(1);
        let b = c.add_bit();
        c.append(Gate::MeasureZ { qubit: 0, bit: b }).unwrap();
        assert!(matches!(c.invert(), Err(CircuitError::NotInvertible { gate: 0, .. })));
    }

    #[test]
    fn depth_basics() {
        let mut c = Circuit::with_width(2);
        c.append(Gate::X { qubit: 0 }).unwrap();
        assert_eq!(c.depth(None).unwrap(), 1);
        c.append(Gate::X { qubit: 1 }).unwrap();
        assert_eq!(c.depth(None).unwrap(), 1);
        c.append(Gate::X { qubit: 1 }).unwrap();
        assert_eq!(c.depth(None).unwrap(), 2);
        assert!(matches!(c.depth(Some("nope")), Err(CircuitError::UnknownSegment(_))));
    }

    #[test]
    fn depth_tracks_classical_dependencies() {
        let mut c = Circuit::with_width(2);
        let b = c.add_bit();
        c.append(Gate::MeasureZ { qubit: 0, bit: b }).unwrap();
        c.append(Gate::CondX { qubit: 1, bit: b }).unwrap();
        assert_eq!(c.depth(None).unwrap(), 2);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let mut c = Circuit::new(vec![QubitRole::Variable { variable: 0, copy: 1 }, QubitRole::Formula]);
        let b = c.add_bit();
        c.segment_scope("s", |c| {
            c.extend([Gate::H { qubit: 0 }, Gate::CX { control: 0, target: 1 }, Gate::MeasureX { qubit: 0, bit: b }])
                .map(|_| ())
        })
        .unwrap();
        c.append(Gate::CondZ { qubit: 1, bit: b }).unwrap();
        let text = c.to_json();
        assert!(text.contains("\"label\": \"v1[e2]\""));
        assert_eq!(Circuit::from_json(&text).unwrap(), c);

        let empty = Circuit::new(vec![]);
        assert_eq!(Circuit::from_json(&empty.to_json()).unwrap(), empty);

        let broken = text.replacen("\"target\": 1", "\"target\": 9", 1);
        assert!(matches!(Circuit::from_json(&broken), Err(CircuitError::QubitOutOfRange { .. })));
    }

    #[test]
    fn append_circuit_renumbers_bits_and_prefixes_segments() {
        let mut inner = Circuit::with_width(2);
        let b = inner.add_bit();
        inner.segment_scope("m", |c| c.append(Gate::MeasureZ { qubit: 0, bit: b }).map(|_| ())).unwrap();
        let mut outer = Circuit::with_width(2);
        outer.append_circuit(&inner, Some("a")).unwrap();
        outer.append_circuit(&inner, Some("b")).unwrap();
        assert_eq!(outer.classical_bit_count(), 2);
        assert_eq!(outer.gates()[1], Gate::MeasureZ { qubit: 0, bit: 1 });
        assert_eq!(outer.segment("b/m").unwrap().start, 1);
    }
}
