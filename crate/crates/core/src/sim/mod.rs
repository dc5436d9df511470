//! State-vector execution: dense and sparse amplitude stores, shot sampling
//! with per-shot RNG streams, and exact branch enumeration over mid-circuit
//! measurements.

mod dense;
mod engine;
mod outcome;
mod sparse;

use num_complex::Complex64;
use thiserror::Error;

pub use dense::StateVector;
pub use engine::{
    evolve, readout_distribution, run_branches, run_exact, run_shots, run_trajectory, statevector_of, Backend, Branch,
    BranchRun, ExactRun, MeasurementRecord, SimConfig,
};
pub use outcome::{render_bits, RunOutcome};
pub use sparse::SparseState;

/// Default ceiling on simulated qubits; override with `QSAT_MAX_QUBITS`.
pub const DEFAULT_MAX_QUBITS: usize = 26;
pub const MAX_QUBITS_ENV: &str = "QSAT_MAX_QUBITS";
pub const DEFAULT_BRANCH_CAP: usize = 1 << 20;

/// Amplitudes at or below this magnitude are dropped by the sparse store.
pub(crate) const PRUNE_AMPLITUDE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("{requested} qubits exceeds the simulator cap of {cap} (set {MAX_QUBITS_ENV} to raise it)")]
    QubitCap { requested: usize, cap: usize },
    #[error("readout qubit {qubit} out of range ({count} qubits)")]
    ReadoutOutOfRange { qubit: usize, count: usize },
    #[error("shot count must be at least 1")]
    ZeroShots,
    #[error("norm drifted to {norm} after gate {gate}")]
    NormDrift { gate: usize, norm: f64 },
    #[error("gate {gate} ({kind}) is not unitary; use run_exact or run_shots")]
    MeasurementPresent { gate: usize, kind: &'static str },
    #[error("branch count exceeded the cap of {cap}")]
    BranchCap { cap: usize },
    #[error("initial state has {state} qubits but the circuit has {circuit}")]
    WidthMismatch { state: usize, circuit: usize },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Qubit cap from `QSAT_MAX_QUBITS`, falling back to the default.
pub fn max_qubits_from_env() -> usize {
    std::env::var(MAX_QUBITS_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_MAX_QUBITS)
}

/// Common interface of the amplitude stores.
///
/// Controls and phase targets are passed as bit masks over qubit indices.
pub trait QuantumState: Clone + Send + Sync {
    fn zero(qubits: usize) -> Self;
    fn from_amplitudes(qubits: usize, entries: impl IntoIterator<Item = (u64, Complex64)>) -> Self;
    fn qubit_count(&self) -> usize;

    fn apply_h(&mut self, qubit: usize);
    /// X on `target` for basis states where every qubit in `controls` is 1.
    fn apply_mcx(&mut self, controls: u64, target: usize);
    /// Negates basis states where every qubit in `mask` is 1.
    fn apply_phase_flip(&mut self, mask: u64);
    fn apply_fanout(&mut self, control: usize, targets: u64);

    fn apply_x(&mut self, qubit: usize) {
        self.apply_mcx(0, qubit);
    }

    fn apply_z(&mut self, qubit: usize) {
        self.apply_phase_flip(1 << qubit);
    }

    fn probability_one(&self, qubit: usize) -> f64;
    /// Projects onto `qubit = outcome` and rescales the remainder to unit norm.
    fn collapse(&mut self, qubit: usize, outcome: bool);
    fn norm_sqr(&self) -> f64;
    fn amplitude(&self, index: u64) -> Complex64;
    /// Visits entries with nonzero amplitude in ascending index order.
    fn for_each_nonzero(&self, f: &mut dyn FnMut(u64, Complex64));

    fn nonzero_count(&self) -> usize {
        let mut n = 0;
        self.for_each_nonzero(&mut |_, _| n += 1);
        n
    }

    fn entries(&self) -> Vec<(u64, Complex64)> {
        let mut out = Vec::new();
        self.for_each_nonzero(&mut |k, a| out.push((k, a)));
        out
    }

    /// Largest componentwise amplitude difference.
    fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        self.for_each_nonzero(&mut |k, a| worst = worst.max((a - other.amplitude(k)).norm()));
        other.for_each_nonzero(&mut |k, b| worst = worst.max((self.amplitude(k) - b).norm()));
        worst
    }

    /// `max_abs_diff` after rotating `self` by the global phase that best
    /// aligns it with `other`. Branch states are only defined up to such a
    /// phase (a reset of |-> contributes a factor of -1, for instance).
    fn max_abs_diff_up_to_phase(&self, other: &Self) -> f64 {
        let mut inner = Complex64::new(0.0, 0.0);
        self.for_each_nonzero(&mut |k, a| inner += a.conj() * other.amplitude(k));
        if inner.norm() < 1e-300 {
            return self.max_abs_diff(other);
        }
        let phase = inner / inner.norm();
        let mut worst: f64 = 0.0;
        self.for_each_nonzero(&mut |k, a| worst = worst.max((a * phase - other.amplitude(k)).norm()));
        other.for_each_nonzero(&mut |k, b| worst = worst.max((self.amplitude(k) * phase - b).norm()));
        worst
    }
}
