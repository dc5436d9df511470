use std::collections::BTreeMap;

use serde_json::Value;

use super::DistError;
use crate::circuit::QubitRole;
use crate::grover::QubitLayout;

pub const MASTER_NODE: &str = "master";

/// Static assignment of the formula register to nodes. EPR qubits are not
/// listed here; their owners follow the lease table of a compiled circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    nodes: Vec<String>,
    owners: Vec<usize>,
    labels: Vec<String>,
}

impl Partition {
    /// `owners[q]` is the index into `nodes` of the node holding qubit `q`.
    pub fn new(nodes: Vec<String>, owners: Vec<usize>, roles: &[QubitRole]) -> Result<Self, DistError> {
        if owners.len() != roles.len() {
            return Err(DistError::Partition(format!("{} owners given for {} qubits", owners.len(), roles.len())));
        }
        if let Some(&bad) = owners.iter().find(|&&o| o >= nodes.len()) {
            return Err(DistError::Partition(format!("owner index {bad} but only {} nodes", nodes.len())));
        }
        Ok(Partition { nodes, owners, labels: roles.iter().map(QubitRole::label).collect() })
    }

    /// Node `n{i}` holds clause `i`'s literal copies and clause qubit. A
    /// separate `master` node holds `F` and copies of variables that appear
    /// in no clause; with a single clause everything sits on `n1`.
    pub fn clause_per_node(layout: &QubitLayout) -> Result<Self, DistError> {
        if !layout.is_expanded() {
            return Err(DistError::SequentialLayout);
        }
        let m = layout.clause_count();
        let mut nodes: Vec<String> = (1..=m).map(|i| format!("n{i}")).collect();
        let master = if m == 1 {
            0
        } else {
            nodes.push(MASTER_NODE.to_string());
            m
        };
        let mut owners = vec![master; layout.qubit_count()];
        for ci in 0..m {
            for &q in layout.literal_qubits(ci) {
                owners[q] = ci;
            }
            owners[layout.clause_qubit(ci)] = ci;
        }
        Partition::new(nodes, owners, layout.roles())
    }

    /// Every qubit on one node.
    pub fn single_node(roles: &[QubitRole]) -> Self {
        Partition {
            nodes: vec![MASTER_NODE.to_string()],
            owners: vec![0; roles.len()],
            labels: roles.iter().map(QubitRole::label).collect(),
        }
    }

    /// Parses `{"node": ["label", ...], ...}` against the given register.
    pub fn from_json(text: &str, roles: &[QubitRole]) -> Result<Self, DistError> {
        let value: Value = serde_json::from_str(text).map_err(|e| DistError::Partition(e.to_string()))?;
        let map =
            value.as_object().ok_or_else(|| DistError::Partition("expected an object of node -> labels".into()))?;
        let index: BTreeMap<String, usize> = roles.iter().enumerate().map(|(i, r)| (r.label(), i)).collect();
        let mut owners = vec![None; roles.len()];
        let mut nodes = Vec::new();
        for (node, labels) in map {
            let labels = labels
                .as_array()
                .ok_or_else(|| DistError::Partition(format!("node `{node}` must list qubit labels")))?;
            let n = nodes.len();
            nodes.push(node.clone());
            for label in labels {
                let label = label
                    .as_str()
                    .ok_or_else(|| DistError::Partition(format!("node `{node}` has a non-string label")))?;
                let &q =
                    index.get(label).ok_or_else(|| DistError::Partition(format!("unknown qubit label `{label}`")))?;
                if owners[q].replace(n).is_some() {
                    return Err(DistError::Partition(format!("qubit `{label}` assigned to two nodes")));
                }
            }
        }
        let owners = owners
            .into_iter()
            .enumerate()
            .map(|(q, o)| o.ok_or_else(|| DistError::Partition(format!("qubit `{}` has no node", roles[q].label()))))
            .collect::<Result<Vec<_>, _>>()?;
        Partition::new(nodes, owners, roles)
    }

    pub fn to_json(&self) -> String {
        let mut map = serde_json::Map::new();
        for (n, node) in self.nodes.iter().enumerate() {
            let labels: Vec<Value> = self
                .owners
                .iter()
                .enumerate()
                .filter(|(_, &o)| o == n)
                .map(|(q, _)| Value::String(self.labels[q].clone()))
                .collect();
            map.insert(node.clone(), Value::Array(labels));
        }
        serde_json::to_string_pretty(&Value::Object(map)).expect("partition serialization cannot fail")
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_name(&self, node: usize) -> &str {
        &self.nodes[node]
    }

    pub fn qubit_count(&self) -> usize {
        self.owners.len()
    }

    pub fn owner(&self, qubit: usize) -> usize {
        self.owners[qubit]
    }

    /// Number of register qubits per node.
    pub fn node_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.nodes.len()];
        for &o in &self.owners {
            sizes[o] += 1;
        }
        sizes
    }

    /// Each clause's literal copies must share a node with its clause qubit.
    pub fn check_clause_colocation(&self, layout: &QubitLayout) -> Result<(), DistError> {
        for ci in 0..layout.clause_count() {
            let node = self.owner(layout.clause_qubit(ci));
            if layout.literal_qubits(ci).iter().any(|&q| self.owner(q) != node) {
                return Err(DistError::CoLocation { clause: ci + 1 });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{ExpandedFormula, Formula};

    fn layout() -> QubitLayout {
        let f = Formula::from_dimacs_clauses(3, &[&[1], &[-1, 2], &[-1, 3]]).unwrap();
        QubitLayout::parallel(&ExpandedFormula::new(&f))
    }

    #[test]
    fn clause_per_node_for_running_example() {
        let l = layout();
        let p = Partition::clause_per_node(&l).unwrap();
        assert_eq!(p.nodes(), &["n1", "n2", "n3", "master"]);
        // a copies 0,1,2; b 3; c 4; clauses 5,6,7; F 8
        assert_eq!(p.owner(0), 0);
        assert_eq!(p.owner(1), 1);
        assert_eq!(p.owner(3), 1);
        assert_eq!(p.owner(2), 2);
        assert_eq!(p.owner(4), 2);
        assert_eq!(p.owner(8), 3);
        assert_eq!(p.node_sizes(), vec![2, 3, 3, 1]);
        p.check_clause_colocation(&l).unwrap();
    }

    #[test]
    fn json_round_trip() {
        let l = layout();
        let p = Partition::clause_per_node(&l).unwrap();
        let back = Partition::from_json(&p.to_json(), l.roles()).unwrap();
        for q in 0..l.qubit_count() {
            assert_eq!(back.node_name(back.owner(q)), p.node_name(p.owner(q)));
        }
    }

    #[test]
    fn json_errors() {
        let l = layout();
        assert!(Partition::from_json(r#"{"a": ["zz"]}"#, l.roles()).is_err());
        assert!(Partition::from_json(r#"{"a": ["v1"], "b": ["v1"]}"#, l.roles()).is_err());
        assert!(Partition::from_json(r#"{"a": ["v1"]}"#, l.roles()).is_err());
    }

    #[test]
    fn split_clause_is_rejected() {
        let l = layout();
        let mut owners = vec![0; 9];
        owners[3] = 1;
        let p = Partition::new(vec!["x".into(), "y".into()], owners, l.roles()).unwrap();
        assert!(matches!(p.check_clause_colocation(&l), Err(DistError::CoLocation { clause: 2 })));
    }
}
