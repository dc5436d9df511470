//! Grover search for CNF satisfiability with sequential, parallel
//! (entangled-copy) and distributed (EPR-teleported control) oracles,
//! executed on a state-vector simulator.
//!
//! State vectors are little-endian: basis index `k` has qubit `j` equal to
//! `(k >> j) & 1`. Readout bit-strings are rendered with the first readout
//! qubit leftmost, so variable 1 is the leftmost character.

pub mod circuit;
pub mod cli;
pub mod distnet;
pub mod formula;
pub mod grover;
pub mod pipeline;
pub mod sim;
pub mod verify;

pub use circuit::{Circuit, Gate, QubitRole};
pub use formula::{parse_dimacs, ExpandedFormula, Formula};
