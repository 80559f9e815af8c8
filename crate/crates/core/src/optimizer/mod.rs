//! Placement of workloads onto CPU and memory modules minimizing total power.
//!
//! The formulation assigns every workload to exactly one CPU module and one
//! memory module. Module power follows [`crate::power`], network power follows
//! [`crate::fabric`]. Four solvers share it:
//!
//! * [`solve_exact`]: depth-first branch-and-bound with bin-packing bounds and symmetry breaking.
//! * [`solve_greedy`]: first-fit-decreasing with marginal-cost module choice.
//! * [`brute_force_oracle`]: exhaustive enumeration for small instances.
//! * [`export_lp`]: the same model as a CPLEX LP file for external solvers.

mod binpack;
mod exact;
mod greedy;
mod lp;
mod model;
mod oracle;

use std::collections::BTreeSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::domain::{placement_violations, ArchitectureKind, Placement, ResourceKind, Topology, Violation, Workload};
use crate::fabric::TierPolicy;
use crate::power::{power_report, PowerError, PowerReport};

pub use binpack::{l2_lower_bound, min_bins, BinCount};
pub use exact::solve_exact;
pub use greedy::solve_greedy;
pub use lp::export_lp;
pub use oracle::{brute_force_oracle, optimal_placements, ORACLE_MAX_MODULES_PER_KIND, ORACLE_MAX_WORKLOADS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("invalid instance: {0}")]
    Instance(String),
    #[error("no feasible placement exists")]
    Infeasible,
    #[error("search budget exhausted before any feasible placement was found")]
    BudgetExhausted,
    #[error("greedy heuristic found no module for workload {workload}")]
    HeuristicDeadEnd { workload: u32 },
    #[error("instance too large for brute force ({workloads} workloads, {max_modules} modules of one kind)")]
    TooLarge { workloads: usize, max_modules: usize },
    #[error(transparent)]
    Power(#[from] PowerError),
}

/// Topology, workloads and attribution policy of one placement problem.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpInstance {
    pub topology: Topology,
    pub workloads: Vec<Workload>,
    pub policy: TierPolicy,
    /// When false, rack-scale workloads must take CPU and memory from the same rack.
    pub allow_cross_rack: bool,
}

impl MilpInstance {
    pub fn new(topology: Topology, workloads: Vec<Workload>, policy: TierPolicy) -> Result<Self, SolveError> {
        let instance = MilpInstance { topology, workloads, policy, allow_cross_rack: true };
        instance.validate()?;
        Ok(instance)
    }

    pub fn with_cross_rack(mut self, allow: bool) -> Self {
        self.allow_cross_rack = allow;
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        self.topology.validate().map_err(|e| SolveError::Instance(e.to_string()))?;
        let mut ids = BTreeSet::new();
        for w in &self.workloads {
            w.validate().map_err(|e| SolveError::Instance(e.to_string()))?;
            if !ids.insert(w.id) {
                return Err(SolveError::Instance(format!("duplicate workload id {}", w.id)));
            }
            if !self.fits_somewhere(w) {
                return Err(SolveError::Instance(format!(
                    "workload {} ({} GHz, {} GB) fits no module",
                    w.id, w.cpu_demand, w.mem_demand
                )));
            }
        }
        Ok(())
    }

    fn fits_somewhere(&self, w: &Workload) -> bool {
        let t = &self.topology;
        t.modules_of(ResourceKind::Cpu).any(|c| {
            c.spec.capacity >= w.cpu_demand
                && t.modules_of(ResourceKind::Mem)
                    .any(|m| m.spec.capacity >= w.mem_demand && self.pair_allowed(c.id, m.id))
        })
    }

    /// Whether a workload may take CPU from `cpu` and memory from `mem`.
    pub fn pair_allowed(&self, cpu: u32, mem: u32) -> bool {
        let (Some(c), Some(m)) = (self.topology.module(cpu), self.topology.module(mem)) else {
            return false;
        };
        match self.topology.kind {
            ArchitectureKind::Traditional => c.board.is_some() && c.board == m.board,
            ArchitectureKind::RackScale if !self.allow_cross_rack => c.rack == m.rack,
            _ => true,
        }
    }
}

/// Search limits for [`solve_exact`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub node_budget: u64,
    pub time_budget: Duration,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { node_budget: 10_000_000, time_budget: Duration::from_secs(300) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub placement: Placement,
    /// Total power in W, recomputed from the placement with [`power_report`].
    pub objective_w: f64,
    pub proven_optimal: bool,
    pub nodes_explored: u64,
    /// Not serialized, so encoded results stay reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Every violated constraint of `placement`; an empty list means feasible.
pub fn check_feasible(instance: &MilpInstance, placement: &Placement) -> Result<(), Vec<Violation>> {
    let mut violations = placement_violations(&instance.topology, &instance.workloads, placement);
    if instance.topology.kind == ArchitectureKind::RackScale && !instance.allow_cross_rack {
        for a in placement.iter() {
            let known = instance.topology.module(a.cpu).is_some() && instance.topology.module(a.mem).is_some();
            if known && !instance.pair_allowed(a.cpu, a.mem) {
                violations.push(Violation::CrossRack { workload: a.workload, cpu: a.cpu, mem: a.mem });
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

pub fn evaluate(instance: &MilpInstance, placement: &Placement) -> Result<PowerReport, SolveError> {
    check_feasible(instance, placement).map_err(|v| SolveError::Power(PowerError::Infeasible(v)))?;
    Ok(power_report(&instance.topology, &instance.workloads, placement, instance.policy)?)
}

/// Total power of a feasible placement.
pub fn objective_value(instance: &MilpInstance, placement: &Placement) -> Result<f64, SolveError> {
    evaluate(instance, placement).map(|r| r.total_w)
}

pub(crate) fn finish(
    instance: &MilpInstance,
    placement: Placement,
    proven_optimal: bool,
    nodes_explored: u64,
    started: std::time::Instant,
) -> Result<SolveResult, SolveError> {
    let objective_w = objective_value(instance, &placement)?;
    Ok(SolveResult { placement, objective_w, proven_optimal, nodes_explored, wall_time: started.elapsed() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_topology, Deci, EpbTable, FlowRates, ResourceSpec};

    fn instance(kind: ArchitectureKind, n: u32, racks: u32, ws: &[(u32, u32)]) -> MilpInstance {
        let t = build_topology(
            kind,
            n,
            n,
            racks,
            ResourceSpec::reference_cpu(),
            ResourceSpec::reference_mem(),
            EpbTable::default(),
        )
        .unwrap();
        let ws = ws
            .iter()
            .enumerate()
            .map(|(i, &(c, m))| Workload::new(i as u32, Deci(c), Deci(m), FlowRates::reference()).unwrap())
            .collect();
        MilpInstance::new(t, ws, TierPolicy::TopTier).unwrap()
    }

    #[test]
    fn co_location_violation() {
        let inst = instance(ArchitectureKind::Traditional, 3, 1, &[(20, 60)]);
        let mut p = Placement::new();
        p.assign(0, 1, 5);
        let v = check_feasible(&inst, &p).unwrap_err();
        assert_eq!(v, vec![Violation::CoLocation { workload: 0, cpu: 1, mem: 5 }]);
        assert!(v[0].to_string().starts_with("co-location"));
    }

    #[test]
    fn empty_instance_is_feasible() {
        let inst = instance(ArchitectureKind::PodScale, 2, 2, &[]);
        assert_eq!(check_feasible(&inst, &Placement::new()), Ok(()));
        assert_eq!(objective_value(&inst, &Placement::new()).unwrap(), 0.0);
    }

    #[test]
    fn capacity_violation_reports_excess() {
        let inst = instance(ArchitectureKind::RackScale, 2, 1, &[(19, 50), (18, 50)]);
        let mut p = Placement::new();
        p.assign(0, 0, 2);
        p.assign(1, 0, 2);
        let v = check_feasible(&inst, &p).unwrap_err();
        assert_eq!(v.len(), 1);
        match &v[0] {
            Violation::Capacity { module, excess, .. } => {
                assert_eq!((*module, *excess), (0, Deci(1)));
                assert!(v[0].to_string().contains("excess 0.1"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn all_violations_are_reported() {
        let inst = instance(ArchitectureKind::Traditional, 2, 1, &[(30, 60), (30, 60), (10, 50)]);
        let mut p = Placement::new();
        p.assign(0, 0, 2);
        p.assign(1, 0, 3);
        let v = check_feasible(&inst, &p).unwrap_err();
        assert!(v.contains(&Violation::Unassigned { workload: 2 }));
        assert!(v.contains(&Violation::CoLocation { workload: 1, cpu: 0, mem: 3 }));
        assert!(v.iter().any(|x| matches!(x, Violation::Capacity { module: 0, .. })));
    }

    #[test]
    fn objective_examples() {
        let trad = instance(ArchitectureKind::Traditional, 2, 1, &[(20, 60), (20, 60)]);
        let mut p = Placement::new();
        p.assign(0, 0, 2);
        p.assign(1, 1, 3);
        assert!((objective_value(&trad, &p).unwrap() - 293.773_333_333_333_3).abs() < 1e-9);

        let rack = instance(ArchitectureKind::RackScale, 2, 1, &[(20, 60), (20, 60)]);
        let mut p = Placement::new();
        p.assign(0, 0, 2);
        p.assign(1, 1, 2);
        let expected = 2.0 * (91.0 + 39.0 * 20.0 / 36.0) + 34.0 + 17.0;
        assert!((objective_value(&rack, &p).unwrap() - expected).abs() < 1e-9);
        assert!((expected - 276.333_333_333_333_3).abs() < 1e-9);
    }

    #[test]
    fn oversized_workload_rejected() {
        let t = build_topology(
            ArchitectureKind::RackScale,
            2,
            2,
            1,
            ResourceSpec::reference_cpu(),
            ResourceSpec::reference_mem(),
            EpbTable::default(),
        )
        .unwrap();
        let w = Workload::new(0, Deci(37), Deci(10), FlowRates::reference()).unwrap();
        assert!(matches!(MilpInstance::new(t, vec![w], TierPolicy::TopTier), Err(SolveError::Instance(_))));
    }

    #[test]
    fn same_rack_rule() {
        let inst = instance(ArchitectureKind::RackScale, 4, 2, &[(20, 60)]).with_cross_rack(false);
        // CPU 0 is in rack 0, memory 5 in rack 1
        assert!(!inst.pair_allowed(0, 5));
        assert!(inst.pair_allowed(0, 4));
        let mut p = Placement::new();
        p.assign(0, 0, 5);
        assert!(check_feasible(&inst, &p).is_err());
    }
}
