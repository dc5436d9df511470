//! Distributed compilation. Clause blocks run on their own nodes; every
//! gate whose controls sit on other nodes is rewritten into the EPR-based
//! teleported-control protocol. Simulation uses one global state with
//! per-qubit node ownership, checked by [`check_locality`].

mod builder;
mod compile;
mod locality;
mod partition;
mod trace;

use thiserror::Error;

use crate::circuit::CircuitError;
use crate::grover::GroverError;

pub use builder::{
    build_distributed_mcu, build_local_mcu, DistributedBuilder, DistributedCircuit, EprPair, EprState, MessageSpec,
    ProtocolInvocation, TargetGate,
};
pub use compile::{
    build_distributed_diffuser, build_distributed_grover, build_distributed_oracle, qubit_budget, BudgetItem,
    BudgetReport, DistributedGrover, NodeBudget, BUDGET_STAGES,
};
pub use locality::{check_locality, LocalityReport, LocalityViolation};
pub use partition::{Partition, MASTER_NODE};
pub use trace::{check_discipline, MessageEvent, MessageTrace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("partition: {0}")]
    Partition(String),
    #[error("clause {clause} is split across nodes")]
    CoLocation { clause: usize },
    #[error("distributed compilation needs the expanded (parallel) layout")]
    SequentialLayout,
    #[error("no EPR pair available (pool limit {limit} reached with reuse disabled)")]
    NoEprAvailable { limit: usize },
    #[error("circuit needs {required} qubits but the cap is {cap}")]
    QubitBudget { required: usize, cap: usize },
    #[error("classical bit {bit} of a protocol message was never written")]
    MissingMessage { bit: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Grover(#[from] GroverError),
}

/// Order in which a representative is copied onto its remote companions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FanoutOrder {
    #[default]
    Forward,
    Reverse,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistOptions {
    /// Reset and re-prepare EPR slots between invocations instead of
    /// allocating fresh qubits for every pair.
    pub reuse: bool,
    /// Cap on EPR slots; `None` is unbounded.
    pub epr_limit: Option<usize>,
    pub fanout_order: FanoutOrder,
    /// Variable whose representative is the diffuser MCZ target; defaults
    /// to the last variable.
    pub diffuser_target: Option<usize>,
}

impl Default for DistOptions {
    fn default() -> Self {
        DistOptions { reuse: true, epr_limit: None, fanout_order: FanoutOrder::Forward, diffuser_target: None }
    }
}
