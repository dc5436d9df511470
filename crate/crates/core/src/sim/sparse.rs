use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use super::{QuantumState, PRUNE_AMPLITUDE};

/// Sparse amplitude map keyed by basis index. Suited to the GHZ-consistent
/// and EPR-heavy states of expanded and distributed circuits, where most of
/// the `2^n` amplitudes are zero. Supports up to 64 qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseState {
    qubits: usize,
    amps: BTreeMap<u64, Complex64>,
}

impl SparseState {
    fn remap(&mut self, f: impl Fn(u64) -> u64) {
        let old = std::mem::take(&mut self.amps);
        self.amps = old.into_iter().map(|(k, a)| (f(k), a)).collect();
    }
}

impl QuantumState for SparseState {
    fn zero(qubits: usize) -> Self {
        assert!(qubits <= 64, "sparse state supports at most 64 qubits");
        let mut amps = BTreeMap::new();
        amps.insert(0, Complex64::new(1.0, 0.0));
        SparseState { qubits, amps }
    }

    fn from_amplitudes(qubits: usize, entries: impl IntoIterator<Item = (u64, Complex64)>) -> Self {
        let mut amps = BTreeMap::new();
        for (k, a) in entries {
            *amps.entry(k).or_insert_with(Complex64::default) += a;
        }
        amps.retain(|_, a: &mut Complex64| a.norm() > PRUNE_AMPLITUDE);
        SparseState { qubits, amps }
    }

    fn qubit_count(&self) -> usize {
        self.qubits
    }

    fn apply_h(&mut self, qubit: usize) {
        let bit = 1u64 << qubit;
        let mut out: BTreeMap<u64, Complex64> = BTreeMap::new();
        for (&k, &a) in &self.amps {
            let s = a * FRAC_1_SQRT_2;
            *out.entry(k & !bit).or_default() += s;
            if k & bit == 0 {
                *out.entry(k | bit).or_default() += s;
            } else {
                *out.entry(k).or_default() -= s;
            }
        }
        out.retain(|_, a| a.norm() > PRUNE_AMPLITUDE);
        self.amps = out;
    }

    fn apply_mcx(&mut self, controls: u64, target: usize) {
        let bit = 1u64 << target;
        self.remap(|k| if k & controls == controls { k ^ bit } else { k });
    }

    fn apply_phase_flip(&mut self, mask: u64) {
        for (k, a) in self.amps.iter_mut() {
            if k & mask == mask {
                *a = -*a;
            }
        }
    }

    fn apply_fanout(&mut self, control: usize, targets: u64) {
        let c = 1u64 << control;
        self.remap(|k| if k & c != 0 { k ^ targets } else { k });
    }

    fn probability_one(&self, qubit: usize) -> f64 {
        let bit = 1u64 << qubit;
        self.amps.iter().filter(|(k, _)| *k & bit != 0).map(|(_, a)| a.norm_sqr()).sum()
    }

    fn collapse(&mut self, qubit: usize, outcome: bool) {
        let bit = 1u64 << qubit;
        self.amps.retain(|k, _| (k & bit != 0) == outcome);
        let scale = 1.0 / self.norm_sqr().sqrt();
        for a in self.amps.values_mut() {
            *a *= scale;
        }
    }

    fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    fn amplitude(&self, index: u64) -> Complex64 {
        self.amps.get(&index).copied().unwrap_or_default()
    }

    fn for_each_nonzero(&self, f: &mut dyn FnMut(u64, Complex64)) {
        for (&k, &a) in &self.amps {
            f(k, a);
        }
    }

    fn nonzero_count(&self) -> usize {
        self.amps.len()
    }
}
