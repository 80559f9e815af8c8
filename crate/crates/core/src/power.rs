//! Module power model and the CPU + memory + network power decomposition.

use serde::{Deserialize, Serialize};

use crate::domain::{
    module_loads, placement_violations, Deci, Placement, ResourceKind, ResourceSpec, Tier, Topology, Violation,
    Workload,
};
use crate::fabric::{network_power_by_tier, traffic_by_tier, FabricError, TierPolicy};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PowerError {
    #[error("utilization {0} is outside [0, 1]")]
    Utilization(f64),
    #[error("module {module} is overloaded by {excess}")]
    Overloaded { module: u32, excess: Deci },
    #[error("unknown module {0}")]
    UnknownModule(u32),
    #[error("infeasible placement: {}", format_violations(.0))]
    Infeasible(Vec<Violation>),
    #[error(transparent)]
    Fabric(#[from] FabricError),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Power of a powered-on module: idle floor plus the load-proportional share of the dynamic range.
pub fn resource_power(spec: &ResourceSpec, utilization: f64) -> Result<f64, PowerError> {
    if !(0.0..=1.0).contains(&utilization) {
        return Err(PowerError::Utilization(utilization));
    }
    Ok(spec.idle_power_w() + spec.dynamic_range * spec.peak_power_w * utilization)
}

/// Fraction of a module's capacity taken by the demands placed on it.
pub fn utilization_of(
    topology: &Topology,
    workloads: &[Workload],
    placement: &Placement,
    module_id: u32,
) -> Result<f64, PowerError> {
    let module = topology.module(module_id).ok_or(PowerError::UnknownModule(module_id))?;
    let kind = module.kind();
    let load: u32 = workloads
        .iter()
        .filter(|w| {
            placement.get(w.id).is_some_and(|(cpu, mem)| match kind {
                ResourceKind::Cpu => cpu == module_id,
                ResourceKind::Mem => mem == module_id,
            })
        })
        .map(|w| w.demand(kind).0)
        .sum();
    let cap = module.spec.capacity.0;
    if load > cap {
        return Err(PowerError::Overloaded { module: module_id, excess: Deci(load - cap) });
    }
    Ok(f64::from(load) / f64::from(cap))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierUsage {
    pub tier: Tier,
    pub traffic_gbps: f64,
    pub power_w: f64,
}

/// Breakdown of total power into CPU, memory and network parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub tcpc_w: f64,
    pub tmpc_w: f64,
    pub tnpc_w: f64,
    pub total_w: f64,
    pub per_tier: Vec<TierUsage>,
    pub active_cpus: u32,
    pub active_mems: u32,
    pub avg_active_cpu_util: f64,
    pub avg_active_mem_util: f64,
}

impl PowerReport {
    pub fn tier(&self, tier: Tier) -> TierUsage {
        self.per_tier.iter().copied().find(|u| u.tier == tier).unwrap_or(TierUsage {
            tier,
            traffic_gbps: 0.0,
            power_w: 0.0,
        })
    }
}

struct KindTotals {
    power: f64,
    active: u32,
    util_sum: f64,
}

fn kind_totals(topology: &Topology, loads: &[Deci], kind: ResourceKind) -> Result<KindTotals, PowerError> {
    let mut totals = KindTotals { power: 0.0, active: 0, util_sum: 0.0 };
    for m in topology.modules_of(kind) {
        let load = loads[m.id as usize].0;
        // modules with nothing assigned are switched off
        if load == 0 {
            continue;
        }
        let u = f64::from(load) / f64::from(m.spec.capacity.0);
        totals.power += resource_power(&m.spec, u)?;
        totals.active += 1;
        totals.util_sum += u;
    }
    Ok(totals)
}

pub fn power_report(
    topology: &Topology,
    workloads: &[Workload],
    placement: &Placement,
    policy: TierPolicy,
) -> Result<PowerReport, PowerError> {
    let violations = placement_violations(topology, workloads, placement);
    if !violations.is_empty() {
        return Err(PowerError::Infeasible(violations));
    }
    let loads = module_loads(topology, workloads, placement);
    let cpu = kind_totals(topology, &loads, ResourceKind::Cpu)?;
    let mem = kind_totals(topology, &loads, ResourceKind::Mem)?;

    let traffic = traffic_by_tier(topology, workloads, placement, policy)?;
    let network = network_power_by_tier(&traffic, &topology.epb);
    let per_tier = Tier::ALL
        .into_iter()
        .map(|tier| TierUsage { tier, traffic_gbps: traffic.get(tier), power_w: network.per_tier.get(tier) })
        .collect();

    let mean = |sum: f64, n: u32| if n == 0 { 0.0 } else { sum / f64::from(n) };
    Ok(PowerReport {
        tcpc_w: cpu.power,
        tmpc_w: mem.power,
        tnpc_w: network.total_w,
        total_w: cpu.power + mem.power + network.total_w,
        per_tier,
        active_cpus: cpu.active,
        active_mems: mem.active,
        avg_active_cpu_util: mean(cpu.util_sum, cpu.active),
        avg_active_mem_util: mean(mem.util_sum, mem.active),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_topology, ArchitectureKind, EpbTable, FlowRates};

    const EPS: f64 = 1e-9;

    fn topo(kind: ArchitectureKind, n: u32, racks: u32) -> Topology {
        build_topology(
            kind,
            n,
            n,
            racks,
            ResourceSpec::reference_cpu(),
            ResourceSpec::reference_mem(),
            EpbTable::default(),
        )
        .unwrap()
    }

    fn wl(id: u32, cpu: u32, mem: u32) -> Workload {
        Workload::new(id, Deci(cpu), Deci(mem), FlowRates::reference()).unwrap()
    }

    #[test]
    fn resource_power_examples() {
        let cpu = ResourceSpec::reference_cpu();
        let mem = ResourceSpec::reference_mem();
        assert!((resource_power(&cpu, 1.0).unwrap() - 130.0).abs() < 1e-12);
        assert!((resource_power(&cpu, 0.0).unwrap() - 91.0).abs() < 1e-12);
        assert!((resource_power(&mem, 0.5).unwrap() - 34.0).abs() < 1e-12);
        assert_eq!(resource_power(&cpu, 1.01), Err(PowerError::Utilization(1.01)));
        assert!(resource_power(&cpu, f64::NAN).is_err());
    }

    #[test]
    fn utilization_examples() {
        let t = topo(ArchitectureKind::RackScale, 2, 1);
        let ws = vec![wl(0, 20, 50), wl(1, 10, 60), wl(2, 10, 80)];
        let mut p = Placement::new();
        p.assign(0, 0, 2);
        p.assign(1, 1, 2);
        p.assign(2, 1, 2);
        assert!((utilization_of(&t, &ws, &p, 0).unwrap() - 20.0 / 36.0).abs() < 1e-15);
        assert!((utilization_of(&t, &ws, &p, 2).unwrap() - 190.0 / 240.0).abs() < 1e-15);
        assert_eq!(utilization_of(&t, &ws, &p, 3).unwrap(), 0.0);

        p.assign(1, 0, 2);
        p.assign(2, 0, 2);
        assert_eq!(utilization_of(&t, &ws, &p, 0), Err(PowerError::Overloaded { module: 0, excess: Deci(4) }));
    }

    #[test]
    fn two_servers_report() {
        let t = topo(ArchitectureKind::Traditional, 2, 1);
        let ws = vec![wl(0, 20, 60), wl(1, 20, 60)];
        let mut p = Placement::new();
        p.assign(0, 0, 2);
        p.assign(1, 1, 3);
        let r = power_report(&t, &ws, &p, TierPolicy::TopTier).unwrap();
        assert!((r.tcpc_w - 2.0 * (91.0 + 39.0 * 20.0 / 36.0)).abs() < EPS);
        assert!((r.tmpc_w - 62.0).abs() < EPS);
        assert!((r.tnpc_w - 6.44).abs() < EPS);
        assert_eq!(r.total_w, r.tcpc_w + r.tmpc_w + r.tnpc_w);
        assert!((r.total_w - 293.773_333_333_333_3).abs() < 1e-9);
        assert_eq!((r.active_cpus, r.active_mems), (2, 2));
        assert!((r.avg_active_mem_util - 0.25).abs() < EPS);
    }

    #[test]
    fn empty_report() {
        let t = topo(ArchitectureKind::PodScale, 2, 2);
        let r = power_report(&t, &[], &Placement::new(), TierPolicy::TopTier).unwrap();
        assert_eq!(r.total_w, 0.0);
        assert_eq!(r.active_cpus + r.active_mems, 0);
        assert_eq!(r.avg_active_cpu_util, 0.0);
    }

    #[test]
    fn consolidating_two_servers_overloads_cpu() {
        let t = topo(ArchitectureKind::Traditional, 2, 1);
        let ws = vec![wl(0, 20, 60), wl(1, 20, 60)];
        let mut p = Placement::new();
        p.assign(0, 0, 2);
        p.assign(1, 0, 2);
        match power_report(&t, &ws, &p, TierPolicy::TopTier) {
            Err(PowerError::Infeasible(v)) => assert_eq!(
                v,
                vec![Violation::Capacity {
                    module: 0,
                    kind: ResourceKind::Cpu,
                    load: Deci(40),
                    capacity: Deci(36),
                    excess: Deci(4)
                }]
            ),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }
}
