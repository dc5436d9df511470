//! Formula to executable circuit in one call, shared by the CLI and the
//! integration suites.

use thiserror::Error;

use crate::circuit::Circuit;
use crate::distnet::{
    build_distributed_diffuser, build_distributed_grover, build_distributed_oracle, DistError, DistOptions,
    DistributedCircuit, Partition,
};
use crate::formula::{ExpandedFormula, Formula};
use crate::grover::{
    build_classic_diffuser, build_grover, build_oracle, build_parallel_diffuser, plan_iterations, GroverError,
    GroverPlan, Mode, QubitLayout,
};
use crate::verify::{count_solutions, VerifyError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Grover(#[from] GroverError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

impl PipelineError {
    /// True when the failure is a qubit or EPR budget rather than bad input.
    pub fn is_resource(&self) -> bool {
        matches!(
            self,
            PipelineError::Grover(GroverError::QubitBudget { .. })
                | PipelineError::Dist(DistError::QubitBudget { .. })
                | PipelineError::Dist(DistError::NoEprAvailable { .. })
                | PipelineError::Dist(DistError::Grover(GroverError::QubitBudget { .. }))
                | PipelineError::Verify(VerifyError::TooManyVariables { .. })
        )
    }
}

#[derive(Debug, Clone)]
pub struct CompileOptions {
    pub mode: Mode,
    pub iterations: Option<usize>,
    /// Only consulted in distributed mode; `None` means one node per clause.
    pub partition: Option<Partition>,
    pub dist: DistOptions,
    pub max_qubits: usize,
}

impl CompileOptions {
    pub fn new(mode: Mode, max_qubits: usize) -> Self {
        CompileOptions { mode, iterations: None, partition: None, dist: DistOptions::default(), max_qubits }
    }
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub expanded: ExpandedFormula,
    pub plan: GroverPlan,
    pub layout: QubitLayout,
    pub circuit: Circuit,
    pub readout: Vec<usize>,
    pub distributed: Option<DistributedCircuit>,
}

/// Counts solutions, plans the iteration count and builds the full search
/// circuit for the requested mode.
pub fn compile(f: &Formula, opts: &CompileOptions) -> Result<Compiled, PipelineError> {
    let expanded = ExpandedFormula::new(f);
    let solutions = count_solutions(f)?;
    let plan = plan_iterations(1u64 << f.variable_count(), solutions, opts.iterations, opts.mode)?;
    if opts.mode == Mode::Distributed {
        let g = build_distributed_grover(&expanded, opts.partition.as_ref(), &plan, &opts.dist, opts.max_qubits)?;
        return Ok(Compiled {
            expanded,
            plan,
            layout: g.layout,
            circuit: g.dc.circuit.clone(),
            readout: g.readout,
            distributed: Some(g.dc),
        });
    }
    let g = build_grover(&expanded, &plan, opts.max_qubits)?;
    Ok(Compiled { expanded, plan, layout: g.layout, circuit: g.circuit, readout: g.readout, distributed: None })
}

/// Layout used by `mode`; distributed circuits run on the expanded layout.
pub fn layout_for(f: &ExpandedFormula, mode: Mode) -> QubitLayout {
    match mode {
        Mode::Sequential => QubitLayout::sequential(f.base()),
        _ => QubitLayout::parallel(f),
    }
}

fn partition_or_default(layout: &QubitLayout, partition: Option<&Partition>) -> Result<Partition, DistError> {
    match partition {
        Some(p) => Ok(p.clone()),
        None => Partition::clause_per_node(layout),
    }
}

/// The oracle alone, as the mode builds it.
pub fn oracle_for_mode(
    f: &ExpandedFormula,
    mode: Mode,
    partition: Option<&Partition>,
    dist: &DistOptions,
) -> Result<Circuit, PipelineError> {
    let layout = layout_for(f, mode);
    Ok(match mode {
        Mode::Distributed => build_distributed_oracle(f, &partition_or_default(&layout, partition)?, dist)?.circuit,
        _ => build_oracle(&layout)?,
    })
}

/// The diffuser alone, as the mode builds it.
pub fn diffuser_for_mode(
    f: &ExpandedFormula,
    mode: Mode,
    partition: Option<&Partition>,
    dist: &DistOptions,
) -> Result<Circuit, PipelineError> {
    let layout = layout_for(f, mode);
    Ok(match mode {
        Mode::Sequential => build_classic_diffuser(layout.roles(), &layout.representatives())?,
        Mode::Parallel => build_parallel_diffuser(&layout)?,
        Mode::Distributed => build_distributed_diffuser(f, &partition_or_default(&layout, partition)?, dist)?.circuit,
    })
}
