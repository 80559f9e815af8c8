//! Workloads, resource modules and the three composable datacentre layouts.

mod placement;
mod resource;
mod topology;
mod workload;

pub use placement::{module_loads, placement_violations, Assignment, Placement, Violation};
pub use resource::{Deci, ResourceKind, ResourceSpec};
pub use topology::{build_topology, locate, ArchitectureKind, EpbTable, Location, Module, Tier, Topology};
pub use workload::{FlowKind, FlowRates, Workload};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DomainError {
    #[error("invalid resource spec: {0}")]
    InvalidSpec(String),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("invalid workload: {0}")]
    InvalidWorkload(String),
    #[error("unknown module {0}")]
    UnknownModule(u32),
}
