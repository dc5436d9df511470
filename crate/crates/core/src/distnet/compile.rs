use std::fmt;

use serde::Serialize;

use super::{DistError, DistOptions, DistributedBuilder, DistributedCircuit, FanoutOrder, Partition, TargetGate};
use crate::circuit::Gate;
use crate::formula::ExpandedFormula;
use crate::grover::{append_readout, clause_gates, GroverPlan, QubitLayout};

/// Protocol stages in emission order within one iteration.
pub const BUDGET_STAGES: [&str; 6] = [
    "state_prep",
    "oracle.omega.and",
    "oracle.omega_inv.and",
    "diffuser.disentangle",
    "diffuser.mcz",
    "diffuser.entangle",
];

fn builder_for(
    layout: &QubitLayout,
    partition: &Partition,
    options: &DistOptions,
) -> Result<DistributedBuilder, DistError> {
    partition.check_clause_colocation(layout)?;
    DistributedBuilder::new(partition.clone(), layout.roles().to_vec(), options.clone())
}

fn emit_prep(b: &mut DistributedBuilder, layout: &QubitLayout) -> Result<(), DistError> {
    for v in 0..layout.variable_count() {
        let rep = layout.representative(v);
        b.local([Gate::H { qubit: rep }])?;
        if !layout.companions(v).is_empty() {
            b.fanout(rep, layout.companions(v), "state_prep")?;
        }
    }
    Ok(())
}

fn emit_oracle(b: &mut DistributedBuilder, layout: &QubitLayout, prefix: &str) -> Result<(), DistError> {
    let clauses: Vec<Gate> = (0..layout.clause_count()).flat_map(|i| clause_gates(layout, i)).collect();
    let f = layout.formula_qubit();
    b.segment(&format!("{prefix}omega"), |b| {
        b.segment(&format!("{prefix}omega/clauses"), |b| b.local(clauses.clone()))?;
        b.segment(&format!("{prefix}omega/and"), |b| {
            b.mcu(layout.clause_qubits(), f, TargetGate::X, "oracle.omega.and")
        })
    })?;
    b.segment(&format!("{prefix}phase"), |b| b.local([Gate::Z { qubit: f }]))?;
    b.segment(&format!("{prefix}omega_inv"), |b| {
        b.segment(&format!("{prefix}omega_inv/and"), |b| {
            b.mcu(layout.clause_qubits(), f, TargetGate::X, "oracle.omega_inv.and")
        })?;
        b.segment(&format!("{prefix}omega_inv/clauses"), |b| b.local(clauses.iter().rev().cloned()))
    })
}

fn emit_copies(b: &mut DistributedBuilder, layout: &QubitLayout, stage: &str) -> Result<(), DistError> {
    for v in 0..layout.variable_count() {
        let mut companions = layout.companions(v).to_vec();
        if companions.is_empty() {
            continue;
        }
        if b.options().fanout_order == FanoutOrder::Reverse {
            companions.reverse();
        }
        b.fanout(layout.representative(v), &companions, stage)?;
    }
    Ok(())
}

fn emit_diffuser(b: &mut DistributedBuilder, layout: &QubitLayout, prefix: &str) -> Result<(), DistError> {
    let reps = layout.representatives();
    let target_var = b.options().diffuser_target.unwrap_or(reps.len() - 1).min(reps.len() - 1);
    let target = reps[target_var];
    let controls: Vec<usize> = reps.iter().copied().filter(|&q| q != target).collect();
    b.segment(&format!("{prefix}disentangle"), |b| emit_copies(b, layout, "diffuser.disentangle"))?;
    b.segment(&format!("{prefix}core"), |b| {
        b.local(reps.iter().map(|&qubit| Gate::H { qubit }))?;
        b.local(reps.iter().map(|&qubit| Gate::X { qubit }))?;
        b.mcu(&controls, target, TargetGate::Z, "diffuser.mcz")?;
        b.local(reps.iter().map(|&qubit| Gate::X { qubit }))?;
        b.local(reps.iter().map(|&qubit| Gate::H { qubit }))
    })?;
    b.segment(&format!("{prefix}entangle"), |b| emit_copies(b, layout, "diffuser.entangle"))
}

/// Distributed oracle alone: local clause blocks, a teleported conjunction
/// onto `F`, the phase flip, a second teleported conjunction, and the
/// inverted clause blocks.
pub fn build_distributed_oracle(
    f: &ExpandedFormula,
    partition: &Partition,
    options: &DistOptions,
) -> Result<DistributedCircuit, DistError> {
    let layout = QubitLayout::parallel(f);
    let mut b = builder_for(&layout, partition, options)?;
    emit_oracle(&mut b, &layout, "")?;
    Ok(b.finish())
}

/// Distributed diffuser alone: copies are released one teleported CX at a
/// time, the representatives are diffused around a teleported MCZ, and the
/// copies are re-entangled.
pub fn build_distributed_diffuser(
    f: &ExpandedFormula,
    partition: &Partition,
    options: &DistOptions,
) -> Result<DistributedCircuit, DistError> {
    let layout = QubitLayout::parallel(f);
    let mut b = DistributedBuilder::new(partition.clone(), layout.roles().to_vec(), options.clone())?;
    emit_diffuser(&mut b, &layout, "")?;
    Ok(b.finish())
}

#[derive(Debug, Clone)]
pub struct DistributedGrover {
    pub dc: DistributedCircuit,
    pub layout: QubitLayout,
    pub readout: Vec<usize>,
}

/// Full distributed search circuit. Segment names follow the local
/// compiler (`prep`, `iter{k}/oracle/...`, `iter{k}/diffuser/...`,
/// `measure`) plus `protocol{n}/step{1,2,3}` for every invocation.
pub fn build_distributed_grover(
    f: &ExpandedFormula,
    partition: Option<&Partition>,
    plan: &GroverPlan,
    options: &DistOptions,
    max_qubits: usize,
) -> Result<DistributedGrover, DistError> {
    let layout = QubitLayout::parallel(f);
    let default_partition;
    let partition = match partition {
        Some(p) => p,
        None => {
            default_partition = Partition::clause_per_node(&layout)?;
            &default_partition
        }
    };
    let mut b = builder_for(&layout, partition, options)?;
    b.segment("prep", |b| emit_prep(b, &layout))?;
    for k in 1..=plan.iterations {
        b.segment(&format!("iter{k}/oracle"), |b| emit_oracle(b, &layout, &format!("iter{k}/oracle/")))?;
        b.segment(&format!("iter{k}/diffuser"), |b| emit_diffuser(b, &layout, &format!("iter{k}/diffuser/")))?;
    }
    let readout = layout.representatives();
    append_readout(b.circuit_mut(), &readout)?;
    let dc = b.finish();
    if dc.circuit.qubit_count() > max_qubits {
        return Err(DistError::QubitBudget { required: dc.circuit.qubit_count(), cap: max_qubits });
    }
    Ok(DistributedGrover { dc, layout, readout })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BudgetItem {
    pub stage: String,
    pub invocations: usize,
    pub pairs: usize,
    /// Two qubits per pair, counted as if every pair were fresh.
    pub epr_qubits: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeBudget {
    pub node: String,
    pub formula_qubits: usize,
    /// EPR halves held by the node: all of them without reuse, the peak
    /// held at once with reuse.
    pub epr_halves: usize,
}

/// Qubit accounting for one distributed Grover iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BudgetReport {
    pub reuse: bool,
    pub formula_qubits: usize,
    pub epr_qubits: usize,
    pub total: usize,
    pub max_concurrent_pairs: usize,
    pub items: Vec<BudgetItem>,
    pub nodes: Vec<NodeBudget>,
}

impl fmt::Display for BudgetReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "qubit budget ({}):", if self.reuse { "epr reuse" } else { "fresh pairs" })?;
        writeln!(f, "  formula qubits: {}", self.formula_qubits)?;
        for item in &self.items {
            writeln!(
                f,
                "  {:<22} invocations {:>2}  pairs {:>2}  qubits {:>2}",
                item.stage, item.invocations, item.pairs, item.epr_qubits
            )?;
        }
        writeln!(f, "  epr qubits allocated: {}", self.epr_qubits)?;
        writeln!(f, "  max concurrent pairs: {}", self.max_concurrent_pairs)?;
        for n in &self.nodes {
            writeln!(f, "  node {:<8} formula {:>2}  epr halves {:>2}", n.node, n.formula_qubits, n.epr_halves)?;
        }
        write!(f, "  total: {}", self.total)
    }
}

/// Builds one iteration (prep, oracle, diffuser) and itemizes its EPR use.
pub fn qubit_budget(f: &ExpandedFormula, partition: &Partition, reuse: bool) -> Result<BudgetReport, DistError> {
    let plan = GroverPlan {
        search_space: 1 << f.base().variable_count(),
        solutions: 0,
        iterations: 1,
        mode: crate::grover::Mode::Distributed,
        diagnostic: None,
    };
    let options = DistOptions { reuse, ..DistOptions::default() };
    let g = build_distributed_grover(f, Some(partition), &plan, &options, usize::MAX)?;
    let dc = &g.dc;

    let items = BUDGET_STAGES
        .iter()
        .map(|&stage| {
            let inv: Vec<_> = dc.invocations.iter().filter(|i| i.stage == stage).collect();
            let pairs: usize = inv.iter().map(|i| i.pairs.len()).sum();
            BudgetItem { stage: stage.to_string(), invocations: inv.len(), pairs, epr_qubits: 2 * pairs }
        })
        .collect();

    let sizes = partition.node_sizes();
    let nodes = (0..partition.nodes().len())
        .map(|n| {
            let per_invocation = dc.invocations.iter().map(|inv| {
                inv.pairs
                    .iter()
                    .map(|&l| {
                        let p = &dc.leases[l];
                        (p.local_node == n) as usize + (p.remote_node == n) as usize
                    })
                    .sum::<usize>()
            });
            let epr_halves = if reuse { per_invocation.max().unwrap_or(0) } else { per_invocation.sum() };
            NodeBudget { node: partition.node_name(n).to_string(), formula_qubits: sizes[n], epr_halves }
        })
        .collect();

    Ok(BudgetReport {
        reuse,
        formula_qubits: partition.qubit_count(),
        epr_qubits: dc.epr_qubit_count(),
        total: dc.circuit.qubit_count(),
        max_concurrent_pairs: dc.invocations.iter().map(|i| i.pairs.len()).max().unwrap_or(0),
        items,
        nodes,
    })
}
