use std::collections::BTreeSet;

use serde::Serialize;

use super::{EprPair, Partition};
use crate::circuit::Circuit;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalityViolation {
    pub gate: usize,
    pub kind: &'static str,
    /// Nodes touched by the gate; `?` marks an operand no node owns at that point.
    pub nodes: Vec<String>,
    pub qubits: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct LocalityReport {
    pub violations: Vec<LocalityViolation>,
}

impl LocalityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn owner_at(q: usize, gate: usize, partition: &Partition, leases: &[EprPair]) -> Option<usize> {
    if q < partition.qubit_count() {
        return Some(partition.owner(q));
    }
    leases.iter().filter(|p| p.allocated_at <= gate && gate <= p.released_at).find_map(|p| {
        if p.local == q {
            Some(p.local_node)
        } else if p.remote == q {
            Some(p.remote_node)
        } else {
            None
        }
    })
}

/// Lists every gate whose operands live on more than one node. The CX that
/// entangles a leased EPR pair is exempt; classical messages are not gates
/// and never count.
pub fn check_locality(c: &Circuit, partition: &Partition, leases: &[EprPair]) -> LocalityReport {
    let mut violations = Vec::new();
    for (i, g) in c.gates().iter().enumerate() {
        let qubits = g.qubits();
        let owners: Vec<Option<usize>> = qubits.iter().map(|&q| owner_at(q, i, partition, leases)).collect();
        let distinct: BTreeSet<Option<usize>> = owners.iter().copied().collect();
        let unowned = distinct.contains(&None);
        if distinct.len() <= 1 && !unowned {
            continue;
        }
        let epr_prep = leases.iter().any(|p| {
            p.prepared_at == i && qubits.len() == 2 && qubits.contains(&p.local) && qubits.contains(&p.remote)
        });
        if epr_prep && !unowned {
            continue;
        }
        violations.push(LocalityViolation {
            gate: i,
            kind: g.name(),
            nodes: distinct.iter().map(|o| o.map_or("?".to_string(), |n| partition.node_name(n).to_string())).collect(),
            qubits: qubits.iter().map(|&q| c.role(q).label()).collect(),
        });
    }
    LocalityReport { violations }
}
