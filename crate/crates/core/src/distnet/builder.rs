use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{DistError, DistOptions, Partition};
use crate::circuit::{Circuit, Gate, QubitRole};

/// The gate a distributed invocation applies to its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetGate {
    X,
    Z,
}

impl TargetGate {
    /// The multi-controlled gate over `controls` and `target`, reduced to a
    /// plain or two-qubit gate for zero or one control.
    pub fn controlled(self, controls: &[usize], target: usize) -> Gate {
        match (self, controls) {
            (TargetGate::X, []) => Gate::X { qubit: target },
            (TargetGate::Z, []) => Gate::Z { qubit: target },
            (TargetGate::X, [c]) => Gate::CX { control: *c, target },
            (TargetGate::X, _) => Gate::Mcx { controls: controls.to_vec(), target },
            (TargetGate::Z, _) => Gate::Mcz { controls: controls.to_vec(), target },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EprState {
    Fresh,
    Consumed,
}

/// One use of an EPR pair: `local` sits with the remote control, `remote`
/// with the master. Ownership of the two slots holds for the gate interval
/// `allocated_at..=released_at`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EprPair {
    pub local: usize,
    pub remote: usize,
    pub local_node: usize,
    pub remote_node: usize,
    pub allocated_at: usize,
    /// Index of the CX that entangles the two halves.
    pub prepared_at: usize,
    pub released_at: usize,
    pub state: EprState,
}

/// A classical message of the protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageSpec {
    pub step: u8,
    pub sender: usize,
    pub receiver: usize,
    pub bit: usize,
    pub measure_gate: usize,
    pub control: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolInvocation {
    /// Compilation stage, e.g. `oracle.omega.and`.
    pub stage: String,
    pub target: usize,
    pub gate: TargetGate,
    pub master: usize,
    pub remote_controls: Vec<usize>,
    pub local_controls: Vec<usize>,
    /// Indices into the lease table.
    pub pairs: Vec<usize>,
    /// Index of the multi-controlled gate of step 2.
    pub step2_gate: usize,
    pub messages: Vec<MessageSpec>,
}

/// A compiled circuit together with its node assignment and protocol records.
#[derive(Debug, Clone)]
pub struct DistributedCircuit {
    pub circuit: Circuit,
    pub partition: Partition,
    pub leases: Vec<EprPair>,
    pub invocations: Vec<ProtocolInvocation>,
}

impl DistributedCircuit {
    /// Qubits used for EPR halves.
    pub fn epr_qubit_count(&self) -> usize {
        self.circuit.qubit_count() - self.partition.qubit_count()
    }
}

/// Emits local gates and teleported multi-controlled gates into one circuit.
#[derive(Debug)]
pub struct DistributedBuilder {
    partition: Partition,
    circuit: Circuit,
    options: DistOptions,
    leases: Vec<EprPair>,
    free_slots: BTreeSet<usize>,
    slot_count: usize,
    invocations: Vec<ProtocolInvocation>,
    protocol_count: usize,
}

impl DistributedBuilder {
    pub fn new(partition: Partition, roles: Vec<QubitRole>, options: DistOptions) -> Result<Self, DistError> {
        if partition.qubit_count() != roles.len() {
            return Err(DistError::Partition(format!(
                "partition covers {} qubits but the register has {}",
                partition.qubit_count(),
                roles.len()
            )));
        }
        Ok(DistributedBuilder {
            partition,
            circuit: Circuit::new(roles),
            options,
            leases: Vec::new(),
            free_slots: BTreeSet::new(),
            slot_count: 0,
            invocations: Vec::new(),
            protocol_count: 0,
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn options(&self) -> &DistOptions {
        &self.options
    }

    /// Appends gates that act within a single node.
    pub fn local(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<(), DistError> {
        self.circuit.extend(gates)?;
        Ok(())
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn circuit_mut(&mut self) -> &mut Circuit {
        &mut self.circuit
    }

    /// Records the gates appended by `body` as segment `name`.
    pub fn segment<T>(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut Self) -> Result<T, DistError>,
    ) -> Result<T, DistError> {
        let start = self.circuit.len();
        let out = body(self)?;
        self.circuit.add_segment(name, start, self.circuit.len())?;
        Ok(out)
    }

    fn take_slot(&mut self) -> Result<usize, DistError> {
        if self.options.reuse {
            if let Some(q) = self.free_slots.pop_first() {
                return Ok(q);
            }
        }
        if self.options.epr_limit.is_some_and(|limit| self.slot_count >= limit) {
            return Err(DistError::NoEprAvailable { limit: self.slot_count });
        }
        let slot = self.slot_count;
        self.slot_count += 1;
        Ok(self.circuit.add_qubit(QubitRole::Epr { slot }))
    }

    fn lease(&mut self, local_node: usize, remote_node: usize) -> Result<usize, DistError> {
        let local = self.take_slot()?;
        let remote = self.take_slot()?;
        let allocated_at = self.circuit.len();
        self.circuit.append(Gate::H { qubit: local })?;
        let prepared_at = self.circuit.len();
        self.circuit.append(Gate::CX { control: local, target: remote })?;
        self.leases.push(EprPair {
            local,
            remote,
            local_node,
            remote_node,
            allocated_at,
            prepared_at,
            released_at: prepared_at,
            state: EprState::Fresh,
        });
        Ok(self.leases.len() - 1)
    }

    fn release(&mut self, lease: usize) {
        let end = self.circuit.len() - 1;
        let pair = &mut self.leases[lease];
        pair.released_at = end;
        pair.state = EprState::Consumed;
        self.free_slots.insert(pair.local);
        self.free_slots.insert(pair.remote);
    }

    /// Applies `gate` to `target` controlled by `controls`, teleporting every
    /// control that lives off the target's node through a fresh EPR pair.
    ///
    /// Per remote control: entangle a pair, CX from the control onto its
    /// half, Z-measure and send the bit (step 1); the master fixes its half
    /// with a conditioned X. The master then runs the multi-controlled gate
    /// on its halves and local controls (step 2), X-measures each half and
    /// sends the bit back, and the control node applies a conditioned Z
    /// (step 3). Both halves are reset.
    pub fn mcu(&mut self, controls: &[usize], target: usize, gate: TargetGate, stage: &str) -> Result<(), DistError> {
        let master = self.partition.owner(target);
        let (remote, local): (Vec<usize>, Vec<usize>) =
            controls.iter().partition(|&&c| self.partition.owner(c) != master);
        if remote.is_empty() {
            self.circuit.append(gate.controlled(controls, target))?;
            return Ok(());
        }
        self.protocol_count += 1;
        let prefix = format!("protocol{}", self.protocol_count);
        let mut messages = Vec::with_capacity(remote.len() * 2);
        let mut pairs = Vec::with_capacity(remote.len());

        let start = self.circuit.len();
        for &c in &remote {
            let node = self.partition.owner(c);
            let lease = self.lease(node, master)?;
            let (e, e_hat) = (self.leases[lease].local, self.leases[lease].remote);
            let bit = self.circuit.add_bit();
            self.circuit.append(Gate::CX { control: c, target: e })?;
            let measure_gate = self.circuit.len();
            self.circuit.append(Gate::MeasureZ { qubit: e, bit })?;
            messages.push(MessageSpec { step: 1, sender: node, receiver: master, bit, measure_gate, control: c });
            self.circuit.append(Gate::CondX { qubit: e_hat, bit })?;
            self.circuit.append(Gate::Reset { qubit: e })?;
            pairs.push(lease);
        }
        self.circuit.add_segment(&format!("{prefix}/step1"), start, self.circuit.len())?;

        let step2_gate = self.circuit.len();
        let mut step2_controls: Vec<usize> = pairs.iter().map(|&l| self.leases[l].remote).collect();
        step2_controls.extend(&local);
        self.circuit.append(gate.controlled(&step2_controls, target))?;
        self.circuit.add_segment(&format!("{prefix}/step2"), step2_gate, step2_gate + 1)?;

        let start = self.circuit.len();
        for (&c, &lease) in remote.iter().zip(&pairs) {
            let node = self.partition.owner(c);
            let e_hat = self.leases[lease].remote;
            let bit = self.circuit.add_bit();
            let measure_gate = self.circuit.len();
            self.circuit.append(Gate::MeasureX { qubit: e_hat, bit })?;
            messages.push(MessageSpec { step: 3, sender: master, receiver: node, bit, measure_gate, control: c });
            self.circuit.append(Gate::CondZ { qubit: c, bit })?;
            self.circuit.append(Gate::Reset { qubit: e_hat })?;
            self.release(lease);
        }
        self.circuit.add_segment(&format!("{prefix}/step3"), start, self.circuit.len())?;

        self.invocations.push(ProtocolInvocation {
            stage: stage.to_string(),
            target,
            gate,
            master,
            remote_controls: remote,
            local_controls: local,
            pairs,
            step2_gate,
            messages,
        });
        Ok(())
    }

    /// CNOT from `control` onto each target: one fanout for the targets
    /// sharing the control's node, then one teleported CX per remote target
    /// in the given order.
    pub fn fanout(&mut self, control: usize, targets: &[usize], stage: &str) -> Result<(), DistError> {
        let home = self.partition.owner(control);
        let (local, remote): (Vec<usize>, Vec<usize>) = targets.iter().partition(|&&t| self.partition.owner(t) == home);
        if !local.is_empty() {
            self.circuit.append(Gate::Fanout { control, targets: local })?;
        }
        for t in remote {
            self.mcu(&[control], t, TargetGate::X, stage)?;
        }
        Ok(())
    }

    pub fn finish(self) -> DistributedCircuit {
        DistributedCircuit {
            circuit: self.circuit,
            partition: self.partition,
            leases: self.leases,
            invocations: self.invocations,
        }
    }
}

/// A standalone teleported m-controlled gate: control `c{i}` on node
/// `n{i}`, target `t` on `master`. The first `local_controls` controls are
/// placed on the master instead.
pub fn build_distributed_mcu(
    m: usize,
    local_controls: usize,
    gate: TargetGate,
    options: DistOptions,
) -> Result<DistributedCircuit, DistError> {
    let mut roles: Vec<QubitRole> = (0..m).map(|index| QubitRole::Control { index }).collect();
    roles.push(QubitRole::Target);
    let mut nodes: Vec<String> = (1..=m).map(|i| format!("n{i}")).collect();
    nodes.push(super::MASTER_NODE.to_string());
    let owners = (0..=m).map(|q| if q == m || q < local_controls { m } else { q }).collect();
    let partition = Partition::new(nodes, owners, &roles)?;
    let mut b = DistributedBuilder::new(partition, roles, options)?;
    b.mcu(&(0..m).collect::<Vec<_>>(), m, gate, "mcu")?;
    Ok(b.finish())
}

/// The same gate applied directly, over the same first `m + 1` wires.
pub fn build_local_mcu(m: usize, gate: TargetGate) -> Result<Circuit, DistError> {
    let mut roles: Vec<QubitRole> = (0..m).map(|index| QubitRole::Control { index }).collect();
    roles.push(QubitRole::Target);
    let mut c = Circuit::new(roles);
    c.append(gate.controlled(&(0..m).collect::<Vec<_>>(), m))?;
    Ok(c)
}
