use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::outcome::{render_bits, RunOutcome};
use super::{max_qubits_from_env, QuantumState, SimError, SparseState, StateVector, DEFAULT_BRANCH_CAP};
use crate::circuit::{Circuit, Gate};

const NORM_TOLERANCE: f64 = 1e-6;
/// Outcomes whose conditional probability falls below this are not branched.
const BRANCH_PRUNE: f64 = 1e-13;
const MERGE_TOLERANCE: f64 = 1e-12;
const EXACT_FLOOR: f64 = 1e-14;
/// Widest circuit the automatic backend choice will hand to the dense store.
const AUTO_DENSE_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Dense for small measurement-free circuits, sparse otherwise.
    #[default]
    Auto,
    Dense,
    Sparse,
}

impl Backend {
    fn resolve(self, c: &Circuit) -> Backend {
        match self {
            Backend::Auto if c.has_measurements() || c.qubit_count() > AUTO_DENSE_LIMIT => Backend::Sparse,
            Backend::Auto => Backend::Dense,
            other => other,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub backend: Backend,
    /// Worker threads for shot sampling; 0 uses the rayon default.
    pub workers: usize,
    pub check_norm: bool,
    pub max_qubits: usize,
    pub branch_cap: usize,
    /// Merge exact-enumeration branches whose states and live bits agree.
    pub merge_branches: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            backend: Backend::Auto,
            workers: 0,
            check_norm: cfg!(debug_assertions),
            max_qubits: max_qubits_from_env(),
            branch_cap: DEFAULT_BRANCH_CAP,
            merge_branches: true,
        }
    }
}

fn mask(qubits: &[usize]) -> u64 {
    qubits.iter().fold(0, |m, &q| m | (1u64 << q))
}

fn apply_unitary<S: QuantumState>(s: &mut S, g: &Gate) {
    match g {
        Gate::X { qubit } => s.apply_x(*qubit),
        Gate::H { qubit } => s.apply_h(*qubit),
        Gate::Z { qubit } => s.apply_z(*qubit),
        Gate::CX { control, target } => s.apply_mcx(1 << control, *target),
        Gate::Mcx { controls, target } => s.apply_mcx(mask(controls), *target),
        Gate::Mcz { controls, target } => s.apply_phase_flip(mask(controls) | (1 << target)),
        Gate::Fanout { control, targets } => s.apply_fanout(*control, mask(targets)),
        _ => unreachable!("non-unitary gate passed to apply_unitary"),
    }
}

fn check_norm<S: QuantumState>(s: &S, gate: usize, enabled: bool) -> Result<(), SimError> {
    if enabled {
        let norm = s.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(SimError::NormDrift { gate, norm });
        }
    }
    Ok(())
}

fn check_width(c: &Circuit, backend: Backend, cfg: &SimConfig) -> Result<(), SimError> {
    let cap = match backend {
        Backend::Sparse => cfg.max_qubits.min(64),
        _ => cfg.max_qubits,
    };
    if c.qubit_count() > cap {
        return Err(SimError::QubitCap { requested: c.qubit_count(), cap });
    }
    Ok(())
}

fn check_readout(c: &Circuit, readout: &[usize]) -> Result<(), SimError> {
    match readout.iter().find(|&&q| q >= c.qubit_count()) {
        Some(&qubit) => Err(SimError::ReadoutOutOfRange { qubit, count: c.qubit_count() }),
        None => Ok(()),
    }
}

fn first_non_unitary(c: &Circuit) -> usize {
    c.gates().iter().position(|g| !g.is_unitary()).unwrap_or(c.len())
}

/// Applies a measurement-free circuit to `state` in place.
pub fn evolve<S: QuantumState>(c: &Circuit, state: &mut S, check: bool) -> Result<(), SimError> {
    if state.qubit_count() != c.qubit_count() {
        return Err(SimError::WidthMismatch { state: state.qubit_count(), circuit: c.qubit_count() });
    }
    for (i, g) in c.gates().iter().enumerate() {
        if !g.is_unitary() {
            return Err(SimError::MeasurementPresent { gate: i, kind: g.name() });
        }
        apply_unitary(state, g);
        check_norm(state, i, check)?;
    }
    Ok(())
}

/// Final dense state of a measurement-free circuit started from |0...0>.
pub fn statevector_of(c: &Circuit, cfg: &SimConfig) -> Result<StateVector, SimError> {
    check_width(c, Backend::Dense, cfg)?;
    let mut s = StateVector::zero(c.qubit_count());
    evolve(c, &mut s, cfg.check_norm)?;
    Ok(s)
}

/// Marginal distribution over `readout`; key bit `i` is the value of `readout[i]`.
pub fn readout_distribution<S: QuantumState>(s: &S, readout: &[usize]) -> BTreeMap<u64, f64> {
    let mut dist = BTreeMap::new();
    s.for_each_nonzero(&mut |k, a| {
        let key = readout.iter().enumerate().fold(0u64, |acc, (i, &q)| acc | (((k >> q) & 1) << i));
        *dist.entry(key).or_insert(0.0) += a.norm_sqr();
    });
    dist
}

fn sample_key(dist: &[(u64, f64)], rng: &mut ChaCha8Rng) -> u64 {
    let total = dist.last().map(|&(_, c)| c).unwrap_or(0.0);
    let r = rng.random::<f64>() * total;
    dist.iter().find(|&&(_, c)| r < c).or(dist.last()).map(|&(k, _)| k).unwrap_or(0)
}

fn cumulative(dist: BTreeMap<u64, f64>) -> Vec<(u64, f64)> {
    let mut acc = 0.0;
    dist.into_iter()
        .map(|(k, p)| {
            acc += p;
            (k, acc)
        })
        .collect()
}

fn measure<S: QuantumState>(s: &mut S, qubit: usize, rng: &mut ChaCha8Rng) -> bool {
    let p1 = s.probability_one(qubit).clamp(0.0, 1.0);
    let outcome = rng.random::<f64>() < p1;
    s.collapse(qubit, outcome);
    outcome
}

fn run_tail<S: QuantumState>(
    c: &Circuit,
    state: &mut S,
    from: usize,
    bits: &mut [Option<bool>],
    rng: &mut ChaCha8Rng,
    check: bool,
) -> Result<(), SimError> {
    for (i, g) in c.gates().iter().enumerate().skip(from) {
        match g {
            Gate::MeasureZ { qubit, bit } => bits[*bit] = Some(measure(state, *qubit, rng)),
            Gate::MeasureX { qubit, bit } => {
                state.apply_h(*qubit);
                bits[*bit] = Some(measure(state, *qubit, rng));
                state.apply_h(*qubit);
            }
            Gate::CondX { qubit, bit } => {
                if bits[*bit] == Some(true) {
                    state.apply_x(*qubit);
                }
            }
            Gate::CondZ { qubit, bit } => {
                if bits[*bit] == Some(true) {
                    state.apply_z(*qubit);
                }
            }
            Gate::Reset { qubit } => {
                if measure(state, *qubit, rng) {
                    state.apply_x(*qubit);
                }
            }
            unitary => apply_unitary(state, unitary),
        }
        check_norm(state, i, check)?;
    }
    Ok(())
}

fn shot_rng(seed: u64, shot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot);
    rng
}

/// One sampled execution of `c` from `initial`, using stream `shot` of
/// `seed`. Returns the final state and the classical bits.
pub fn run_trajectory<S: QuantumState>(
    c: &Circuit,
    mut initial: S,
    seed: u64,
    shot: u64,
    check: bool,
) -> Result<(S, Vec<Option<bool>>), SimError> {
    if initial.qubit_count() != c.qubit_count() {
        return Err(SimError::WidthMismatch { state: initial.qubit_count(), circuit: c.qubit_count() });
    }
    let mut bits = vec![None; c.classical_bit_count()];
    run_tail(c, &mut initial, 0, &mut bits, &mut shot_rng(seed, shot), check)?;
    Ok((initial, bits))
}

/// Samples `shots` independent executions from |0...0>.
///
/// Shot `i` draws from the ChaCha stream `i` of `seed`, so the histogram does
/// not depend on the worker count. The measurement-free prefix of the
/// circuit is evolved once and shared by every shot.
pub fn run_shots(
    c: &Circuit,
    shots: u64,
    seed: u64,
    readout: &[usize],
    cfg: &SimConfig,
) -> Result<RunOutcome, SimError> {
    if shots == 0 {
        return Err(SimError::ZeroShots);
    }
    check_readout(c, readout)?;
    let backend = cfg.backend.resolve(c);
    check_width(c, backend, cfg)?;
    match backend {
        Backend::Dense => shots_with::<StateVector>(c, shots, seed, readout, cfg),
        _ => shots_with::<SparseState>(c, shots, seed, readout, cfg),
    }
}

fn shots_with<S: QuantumState>(
    c: &Circuit,
    shots: u64,
    seed: u64,
    readout: &[usize],
    cfg: &SimConfig,
) -> Result<RunOutcome, SimError> {
    let split = first_non_unitary(c);
    let mut prefix = S::zero(c.qubit_count());
    for (i, g) in c.gates()[..split].iter().enumerate() {
        apply_unitary(&mut prefix, g);
        check_norm(&prefix, i, cfg.check_norm)?;
    }
    let shared = (split == c.len()).then(|| cumulative(readout_distribution(&prefix, readout)));
    log::debug!("{shots} shots: {split} of {} gates shared as a unitary prefix", c.len());
    let nbits = c.classical_bit_count();

    let one_shot = |shot: u64| -> Result<u64, SimError> {
        let mut rng = shot_rng(seed, shot);
        let mut bits = vec![None; nbits];
        let key = match &shared {
            Some(dist) => sample_key(dist, &mut rng),
            None => {
                let mut state = prefix.clone();
                run_tail(c, &mut state, split, &mut bits, &mut rng, cfg.check_norm)?;
                sample_key(&cumulative(readout_distribution(&state, readout)), &mut rng)
            }
        };
        Ok(key)
    };

    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build().map_err(|e| SimError::Pool(e.to_string()))?;
    let results: Vec<_> = pool.install(|| (0..shots).into_par_iter().map(one_shot).collect::<Result<_, _>>())?;

    let mut histogram = BTreeMap::new();
    for key in results {
        *histogram.entry(render_bits(key, readout.len())).or_insert(0) += 1;
    }
    Ok(RunOutcome {
        readout: readout.iter().map(|&q| c.role(q).label()).collect(),
        seed,
        shots,
        histogram,
        exact_distribution: None,
    })
}

/// One path through the measurement tree.
#[derive(Debug, Clone)]
pub struct Branch<S> {
    pub probability: f64,
    pub state: S,
    pub bits: Vec<Option<bool>>,
}

/// Outcome statistics of one measuring gate across the branches reaching it.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub gate: usize,
    /// Conditional probability of outcome 1, one entry per incoming branch.
    pub p_one: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BranchRun<S> {
    pub branches: Vec<Branch<S>>,
    pub measurements: Vec<MeasurementRecord>,
}

/// Exact evolution of `initial` through `c`, splitting on every measurement
/// and reset. Each branch carries its Born probability and normalized state.
///
/// With merging on, branches that agree on every classical bit still to be
/// read and on their state up to global phase (within 1e-12) are combined, which keeps
/// teleportation-style circuits from doubling per measurement.
pub fn run_branches<S: QuantumState>(c: &Circuit, initial: S, cfg: &SimConfig) -> Result<BranchRun<S>, SimError> {
    if initial.qubit_count() != c.qubit_count() {
        return Err(SimError::WidthMismatch { state: initial.qubit_count(), circuit: c.qubit_count() });
    }
    let mut last_read = vec![None; c.classical_bit_count()];
    for (i, g) in c.gates().iter().enumerate() {
        if let Some(b) = g.bit_read() {
            last_read[b] = Some(i);
        }
    }

    let mut frontier = vec![Branch { probability: 1.0, state: initial, bits: vec![None; c.classical_bit_count()] }];
    let mut measurements = Vec::new();
    for (i, g) in c.gates().iter().enumerate() {
        let qubit = match g {
            Gate::MeasureZ { qubit, .. } | Gate::MeasureX { qubit, .. } | Gate::Reset { qubit } => *qubit,
            Gate::CondX { qubit, bit } | Gate::CondZ { qubit, bit } => {
                for b in &mut frontier {
                    if b.bits[*bit] == Some(true) {
                        if matches!(g, Gate::CondX { .. }) {
                            b.state.apply_x(*qubit);
                        } else {
                            b.state.apply_z(*qubit);
                        }
                    }
                    check_norm(&b.state, i, cfg.check_norm)?;
                }
                continue;
            }
            unitary => {
                for b in &mut frontier {
                    apply_unitary(&mut b.state, unitary);
                    check_norm(&b.state, i, cfg.check_norm)?;
                }
                continue;
            }
        };

        let x_basis = matches!(g, Gate::MeasureX { .. });
        let mut record = MeasurementRecord { gate: i, p_one: Vec::with_capacity(frontier.len()) };
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for mut b in frontier {
            if x_basis {
                b.state.apply_h(qubit);
            }
            let p1 = (b.state.probability_one(qubit) / b.state.norm_sqr()).clamp(0.0, 1.0);
            record.p_one.push(p1);
            for (outcome, p) in [(false, 1.0 - p1), (true, p1)] {
                if p < BRANCH_PRUNE {
                    continue;
                }
                let mut child = b.clone();
                child.state.collapse(qubit, outcome);
                child.probability *= p;
                match g {
                    Gate::MeasureX { bit, .. } => {
                        child.state.apply_h(qubit);
                        child.bits[*bit] = Some(outcome);
                    }
                    Gate::MeasureZ { bit, .. } => child.bits[*bit] = Some(outcome),
                    _ => {
                        if outcome {
                            child.state.apply_x(qubit);
                        }
                    }
                }
                check_norm(&child.state, i, cfg.check_norm)?;
                next.push(child);
            }
        }
        measurements.push(record);
        frontier = if cfg.merge_branches { merge(next, &last_read, i) } else { next };
        if frontier.len() > cfg.branch_cap {
            return Err(SimError::BranchCap { cap: cfg.branch_cap });
        }
    }
    Ok(BranchRun { branches: frontier, measurements })
}

fn merge<S: QuantumState>(branches: Vec<Branch<S>>, last_read: &[Option<usize>], now: usize) -> Vec<Branch<S>> {
    let live: Vec<usize> = (0..last_read.len()).filter(|&b| last_read[b].is_some_and(|r| r > now)).collect();
    let mut groups: HashMap<Vec<Option<bool>>, Vec<usize>> = HashMap::new();
    let mut kept: Vec<Branch<S>> = Vec::new();
    for b in branches {
        let key: Vec<Option<bool>> = live.iter().map(|&i| b.bits[i]).collect();
        let slot = groups.entry(key).or_default();
        match slot.iter().find(|&&k| kept[k].state.max_abs_diff_up_to_phase(&b.state) < MERGE_TOLERANCE) {
            Some(&k) => kept[k].probability += b.probability,
            None => {
                slot.push(kept.len());
                kept.push(b);
            }
        }
    }
    kept
}

#[derive(Debug, Clone)]
pub struct ExactRun {
    pub outcome: RunOutcome,
    pub branch_count: usize,
    pub measurements: Vec<MeasurementRecord>,
}

/// Exact readout distribution of `c` from |0...0>, summed over all
/// measurement branches. No sampling takes place.
pub fn run_exact(c: &Circuit, readout: &[usize], cfg: &SimConfig) -> Result<ExactRun, SimError> {
    check_readout(c, readout)?;
    let backend = cfg.backend.resolve(c);
    check_width(c, backend, cfg)?;
    match backend {
        Backend::Dense => exact_with(c, StateVector::zero(c.qubit_count()), readout, cfg),
        _ => exact_with(c, SparseState::zero(c.qubit_count()), readout, cfg),
    }
}

fn exact_with<S: QuantumState>(
    c: &Circuit,
    initial: S,
    readout: &[usize],
    cfg: &SimConfig,
) -> Result<ExactRun, SimError> {
    let run = run_branches(c, initial, cfg)?;
    log::debug!("exact run: {} branches after {} measuring gates", run.branches.len(), run.measurements.len());
    let mut dist: BTreeMap<u64, f64> = BTreeMap::new();
    for b in &run.branches {
        for (k, p) in readout_distribution(&b.state, readout) {
            *dist.entry(k).or_insert(0.0) += b.probability * p;
        }
    }
    let exact =
        dist.into_iter().filter(|&(_, p)| p > EXACT_FLOOR).map(|(k, p)| (render_bits(k, readout.len()), p)).collect();
    Ok(ExactRun {
        outcome: RunOutcome {
            readout: readout.iter().map(|&q| c.role(q).label()).collect(),
            seed: 0,
            shots: 0,
            histogram: BTreeMap::new(),
            exact_distribution: Some(exact),
        },
        branch_count: run.branches.len(),
        measurements: run.measurements,
    })
}
