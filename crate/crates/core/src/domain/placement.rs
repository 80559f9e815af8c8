use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ArchitectureKind, Deci, ResourceKind, Topology, Workload};

/// Modules hosting one workload's CPU and memory demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub workload: u32,
    pub cpu: u32,
    pub mem: u32,
}

/// Workload id to (CPU module, memory module).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<Assignment>", into = "Vec<Assignment>")]
pub struct Placement {
    assignments: BTreeMap<u32, (u32, u32)>,
}

impl Placement {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn assign(&mut self, workload: u32, cpu: u32, mem: u32) {
        self.assignments.insert(workload, (cpu, mem));
    }

    pub fn get(&self, workload: u32) -> Option<(u32, u32)> {
        self.assignments.get(&workload).copied()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Assignments in workload-id order.
    pub fn iter(&self) -> impl Iterator<Item = Assignment> + '_ {
        self.assignments.iter().map(|(&workload, &(cpu, mem))| Assignment { workload, cpu, mem })
    }

    /// Flat `(workload, cpu, mem)` sequence; comparing encodings gives the lexicographic tie-break order.
    pub fn encoding(&self) -> Vec<(u32, u32, u32)> {
        self.iter().map(|a| (a.workload, a.cpu, a.mem)).collect()
    }
}

impl FromIterator<Assignment> for Placement {
    fn from_iter<I: IntoIterator<Item = Assignment>>(iter: I) -> Self {
        let mut p = Placement::new();
        for a in iter {
            p.assign(a.workload, a.cpu, a.mem);
        }
        p
    }
}

impl From<Vec<Assignment>> for Placement {
    fn from(v: Vec<Assignment>) -> Self {
        v.into_iter().collect()
    }
}

impl From<Placement> for Vec<Assignment> {
    fn from(p: Placement) -> Self {
        p.iter().collect()
    }
}

/// One broken constraint of a placement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Violation {
    Unassigned { workload: u32 },
    UnknownWorkload { workload: u32 },
    UnknownModule { workload: u32, module: u32 },
    WrongKind { workload: u32, module: u32, expected: ResourceKind },
    Capacity { module: u32, kind: ResourceKind, load: Deci, capacity: Deci, excess: Deci },
    CoLocation { workload: u32, cpu: u32, mem: u32 },
    CrossRack { workload: u32, cpu: u32, mem: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Unassigned { workload } => write!(f, "assignment: workload {workload} is not placed"),
            Violation::UnknownWorkload { workload } => write!(f, "assignment: workload {workload} does not exist"),
            Violation::UnknownModule { workload, module } => {
                write!(f, "assignment: workload {workload} refers to unknown module {module}")
            }
            Violation::WrongKind { workload, module, expected } => {
                write!(f, "assignment: workload {workload} needs a {expected} module, module {module} is not one")
            }
            Violation::Capacity { module, kind, load, capacity, excess } => {
                write!(f, "capacity: {kind} module {module} carries {load} of {capacity}, excess {excess}")
            }
            Violation::CoLocation { workload, cpu, mem } => {
                write!(f, "co-location: workload {workload} uses CPU {cpu} and memory {mem} on different servers")
            }
            Violation::CrossRack { workload, cpu, mem } => {
                write!(f, "rack pairing: workload {workload} uses CPU {cpu} and memory {mem} in different racks")
            }
        }
    }
}

/// Every constraint a placement breaks: completeness, kinds, capacity and traditional co-location.
pub fn placement_violations(topology: &Topology, workloads: &[Workload], placement: &Placement) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut loads = vec![0u32; topology.modules.len()];
    let known: BTreeSet<u32> = workloads.iter().map(|w| w.id).collect();

    for w in workloads {
        let Some((cpu, mem)) = placement.get(w.id) else {
            violations.push(Violation::Unassigned { workload: w.id });
            continue;
        };
        let mut ok = true;
        for (module, kind) in [(cpu, ResourceKind::Cpu), (mem, ResourceKind::Mem)] {
            match topology.module(module) {
                None => {
                    violations.push(Violation::UnknownModule { workload: w.id, module });
                    ok = false;
                }
                Some(m) if m.kind() != kind => {
                    violations.push(Violation::WrongKind { workload: w.id, module, expected: kind });
                    ok = false;
                }
                Some(_) => loads[module as usize] += w.demand(kind).0,
            }
        }
        if ok && topology.kind == ArchitectureKind::Traditional {
            let cpu_board = topology.module(cpu).and_then(|m| m.board);
            let mem_board = topology.module(mem).and_then(|m| m.board);
            if cpu_board != mem_board {
                violations.push(Violation::CoLocation { workload: w.id, cpu, mem });
            }
        }
    }
    for a in placement.iter() {
        if !known.contains(&a.workload) {
            violations.push(Violation::UnknownWorkload { workload: a.workload });
        }
    }
    for (m, &load) in topology.modules.iter().zip(&loads) {
        let cap = m.spec.capacity.0;
        if load > cap {
            violations.push(Violation::Capacity {
                module: m.id,
                kind: m.kind(),
                load: Deci(load),
                capacity: Deci(cap),
                excess: Deci(load - cap),
            });
        }
    }
    violations
}

/// Assigned demand per module (indexed by module id), without any checks.
pub fn module_loads(topology: &Topology, workloads: &[Workload], placement: &Placement) -> Vec<Deci> {
    let mut loads = vec![0u32; topology.modules.len()];
    for w in workloads {
        if let Some((cpu, mem)) = placement.get(w.id) {
            if let Some(l) = loads.get_mut(cpu as usize) {
                *l += w.cpu_demand.0;
            }
            if let Some(l) = loads.get_mut(mem as usize) {
                *l += w.mem_demand.0;
            }
        }
    }
    loads.into_iter().map(Deci).collect()
}
