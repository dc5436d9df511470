use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use super::QuantumState;

/// Dense amplitude array of length `2^n`, qubit 0 least significant.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

impl QuantumState for StateVector {
    fn zero(qubits: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { qubits, amps }
    }

    fn from_amplitudes(qubits: usize, entries: impl IntoIterator<Item = (u64, Complex64)>) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << qubits];
        for (k, a) in entries {
            amps[k as usize] += a;
        }
        StateVector { qubits, amps }
    }

    fn qubit_count(&self) -> usize {
        self.qubits
    }

    fn apply_h(&mut self, qubit: usize) {
        let bit = 1usize << qubit;
        for k in 0..self.amps.len() {
            if k & bit == 0 {
                let a = self.amps[k];
                let b = self.amps[k | bit];
                self.amps[k] = (a + b) * FRAC_1_SQRT_2;
                self.amps[k | bit] = (a - b) * FRAC_1_SQRT_2;
            }
        }
    }

    fn apply_mcx(&mut self, controls: u64, target: usize) {
        let c = controls as usize;
        let bit = 1usize << target;
        for k in 0..self.amps.len() {
            if k & bit == 0 && k & c == c {
                self.amps.swap(k, k | bit);
            }
        }
    }

    fn apply_phase_flip(&mut self, mask: u64) {
        let m = mask as usize;
        for (k, a) in self.amps.iter_mut().enumerate() {
            if k & m == m {
                *a = -*a;
            }
        }
    }

    fn apply_fanout(&mut self, control: usize, targets: u64) {
        let c = 1usize << control;
        let t = targets as usize;
        for k in 0..self.amps.len() {
            // visit each swapped pair once, from its smaller index
            if k & c != 0 && k < (k ^ t) {
                self.amps.swap(k, k ^ t);
            }
        }
    }

    fn probability_one(&self, qubit: usize) -> f64 {
        let bit = 1usize << qubit;
        self.amps.iter().enumerate().filter(|(k, _)| k & bit != 0).map(|(_, a)| a.norm_sqr()).sum()
    }

    fn collapse(&mut self, qubit: usize, outcome: bool) {
        let bit = 1usize << qubit;
        for (k, a) in self.amps.iter_mut().enumerate() {
            if (k & bit != 0) != outcome {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        let scale = 1.0 / self.norm_sqr().sqrt();
        for a in &mut self.amps {
            *a *= scale;
        }
    }

    fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn amplitude(&self, index: u64) -> Complex64 {
        self.amps.get(index as usize).copied().unwrap_or_default()
    }

    fn for_each_nonzero(&self, f: &mut dyn FnMut(u64, Complex64)) {
        for (k, a) in self.amps.iter().enumerate() {
            if *a != Complex64::new(0.0, 0.0) {
                f(k as u64, *a);
            }
        }
    }

    fn max_abs_diff(&self, other: &Self) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}
