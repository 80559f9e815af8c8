//! Tier attribution of workload flows and network power accounting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{EpbTable, FlowKind, Location, Placement, Tier, Topology, Workload};

/// How a flow's rate is charged to the fabric tiers it crosses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TierPolicy {
    /// Only the highest tier on the route carries the flow.
    #[default]
    TopTier,
    /// Every tier on the hierarchical route carries the flow, with multiplicity.
    FullPath,
}

impl fmt::Display for TierPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TierPolicy::TopTier => "top-tier",
            TierPolicy::FullPath => "full-path",
        })
    }
}

impl FromStr for TierPolicy {
    type Err = FabricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "top-tier" | "toptier" => Ok(TierPolicy::TopTier),
            "full-path" | "fullpath" => Ok(TierPolicy::FullPath),
            other => Err(FabricError::Contract(format!("unknown tier policy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FabricError {
    #[error("flow contract violated: {0}")]
    Contract(String),
    #[error("endpoint module {0} is not part of the topology")]
    UnknownEndpoint(u32),
    #[error("workload {0} is not placed")]
    Unplaced(u32),
}

/// One end of a flow: a resource module or the internet gateway at the fabric edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Module(Location),
    Gateway,
}

/// Multiset of tiers, stored as a count per tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TierMultiset([u8; 4]);

impl TierMultiset {
    fn of(tiers: &[Tier]) -> Self {
        let mut counts = [0u8; 4];
        for t in tiers {
            counts[t.index()] += 1;
        }
        TierMultiset(counts)
    }

    pub fn count(&self, tier: Tier) -> u8 {
        self.0[tier.index()]
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|&c| usize::from(c)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Highest tier present.
    pub fn top(&self) -> Option<Tier> {
        Tier::ALL.into_iter().rev().find(|&t| self.count(t) > 0)
    }

    /// Tiers with repetition, lowest first.
    pub fn to_vec(&self) -> Vec<Tier> {
        Tier::ALL.into_iter().flat_map(|t| std::iter::repeat_n(t, usize::from(self.count(t)))).collect()
    }

    /// Sum of energy per bit along the route, converted to W per Gbps.
    pub fn watts_per_gbps(&self, epb: &EpbTable) -> f64 {
        Tier::ALL.into_iter().map(|t| f64::from(self.count(t)) * epb.get(t)).sum::<f64>() / 1000.0
    }
}

/// A value for each of the four tiers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerTier {
    pub on_board: f64,
    pub rack_backplane: f64,
    pub inter_rack: f64,
    pub inter_dc: f64,
}

impl PerTier {
    pub fn get(&self, tier: Tier) -> f64 {
        match tier {
            Tier::OnBoard => self.on_board,
            Tier::RackBackplane => self.rack_backplane,
            Tier::InterRack => self.inter_rack,
            Tier::InterDc => self.inter_dc,
        }
    }

    pub fn get_mut(&mut self, tier: Tier) -> &mut f64 {
        match tier {
            Tier::OnBoard => &mut self.on_board,
            Tier::RackBackplane => &mut self.rack_backplane,
            Tier::InterRack => &mut self.inter_rack,
            Tier::InterDc => &mut self.inter_dc,
        }
    }

    pub fn total(&self) -> f64 {
        Tier::ALL.into_iter().map(|t| self.get(t)).sum()
    }
}

/// Gbps charged to each tier.
pub type TrafficByTier = PerTier;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkPower {
    pub per_tier: PerTier,
    pub total_w: f64,
}

fn check_endpoint(topology: &Topology, loc: &Location) -> Result<(), FabricError> {
    match topology.module(loc.module_id) {
        Some(m) if m.location() == *loc => Ok(()),
        _ => Err(FabricError::UnknownEndpoint(loc.module_id)),
    }
}

/// Tiers a flow of `kind` between `src` and `dst` is charged to.
pub fn tier_set(
    topology: &Topology,
    policy: TierPolicy,
    kind: FlowKind,
    src: Endpoint,
    dst: Endpoint,
) -> Result<TierMultiset, FabricError> {
    let disaggregated = topology.kind.is_disaggregated();
    match (src, dst) {
        (Endpoint::Module(a), Endpoint::Module(b)) => {
            if kind.is_io() {
                return Err(FabricError::Contract(format!("{kind} must have the gateway as one endpoint")));
            }
            check_endpoint(topology, &a)?;
            check_endpoint(topology, &b)?;
            let same_board = a.board.is_some() && a.board == b.board;
            let tiers = if same_board {
                TierMultiset::of(&[Tier::OnBoard])
            } else if disaggregated && a.rack == b.rack {
                TierMultiset::of(&[Tier::RackBackplane])
            } else {
                match (policy, disaggregated) {
                    (TierPolicy::TopTier, _) => TierMultiset::of(&[Tier::InterRack]),
                    (TierPolicy::FullPath, true) => {
                        TierMultiset::of(&[Tier::RackBackplane, Tier::RackBackplane, Tier::InterRack])
                    }
                    (TierPolicy::FullPath, false) => TierMultiset::of(&[Tier::OnBoard, Tier::OnBoard, Tier::InterRack]),
                }
            };
            Ok(tiers)
        }
        (Endpoint::Module(m), Endpoint::Gateway) | (Endpoint::Gateway, Endpoint::Module(m)) => {
            if kind.is_cpu_mem() {
                return Err(FabricError::Contract(format!("{kind} runs between two modules, not the gateway")));
            }
            check_endpoint(topology, &m)?;
            Ok(match policy {
                TierPolicy::TopTier => TierMultiset::of(&[Tier::InterDc]),
                TierPolicy::FullPath if m.board.is_some() => {
                    TierMultiset::of(&[Tier::OnBoard, Tier::InterRack, Tier::InterDc])
                }
                TierPolicy::FullPath => TierMultiset::of(&[Tier::RackBackplane, Tier::InterRack, Tier::InterDc]),
            })
        }
        (Endpoint::Gateway, Endpoint::Gateway) => {
            Err(FabricError::Contract(format!("{kind} cannot run from the gateway to itself")))
        }
    }
}

/// Endpoints of one flow of a workload placed on `cpu` and `mem`.
pub fn flow_endpoints(kind: FlowKind, cpu: Location, mem: Location) -> (Endpoint, Endpoint) {
    match kind {
        FlowKind::CpuMemUp => (Endpoint::Module(cpu), Endpoint::Module(mem)),
        FlowKind::CpuMemDown => (Endpoint::Module(mem), Endpoint::Module(cpu)),
        FlowKind::CpuIoUp => (Endpoint::Module(cpu), Endpoint::Gateway),
        FlowKind::CpuIoDown => (Endpoint::Gateway, Endpoint::Module(cpu)),
        FlowKind::MemIoUp => (Endpoint::Module(mem), Endpoint::Gateway),
        FlowKind::MemIoDown => (Endpoint::Gateway, Endpoint::Module(mem)),
    }
}

/// Sums every flow rate of every placed workload onto the tiers it is charged to.
///
/// Workloads are visited in slice order and flows in [`FlowKind::ALL`] order.
pub fn traffic_by_tier(
    topology: &Topology,
    workloads: &[Workload],
    placement: &Placement,
    policy: TierPolicy,
) -> Result<TrafficByTier, FabricError> {
    let mut traffic = TrafficByTier::default();
    for w in workloads {
        let (cpu, mem) = placement.get(w.id).ok_or(FabricError::Unplaced(w.id))?;
        let cpu = topology.module(cpu).ok_or(FabricError::UnknownEndpoint(cpu))?.location();
        let mem = topology.module(mem).ok_or(FabricError::UnknownEndpoint(mem))?.location();
        for (kind, rate) in w.flows.iter() {
            let (src, dst) = flow_endpoints(kind, cpu, mem);
            let tiers = tier_set(topology, policy, kind, src, dst)?;
            for tier in Tier::ALL {
                let n = tiers.count(tier);
                if n > 0 {
                    *traffic.get_mut(tier) += rate * f64::from(n);
                }
            }
        }
    }
    Ok(traffic)
}

/// Converts tier traffic to watts: Gbps x pJ/bit = mW.
pub fn network_power_by_tier(traffic: &TrafficByTier, epb: &EpbTable) -> NetworkPower {
    let mut per_tier = PerTier::default();
    for tier in Tier::ALL {
        *per_tier.get_mut(tier) = traffic.get(tier) * epb.get(tier) / 1000.0;
    }
    NetworkPower { per_tier, total_w: per_tier.total() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_topology, locate, ArchitectureKind, Deci, FlowRates, ResourceSpec};

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

    fn wl(id: u32) -> Workload {
        Workload::new(id, Deci(20), Deci(60), FlowRates::reference()).unwrap()
    }

    fn module(t: &Topology, id: u32) -> Endpoint {
        Endpoint::Module(locate(t, id).unwrap())
    }

    #[test]
    fn rack_scale_same_rack_is_backplane() {
        let t = topo(ArchitectureKind::RackScale, 2, 1);
        let s = tier_set(&t, TierPolicy::TopTier, FlowKind::CpuMemUp, module(&t, 0), module(&t, 2)).unwrap();
        assert_eq!(s.to_vec(), vec![Tier::RackBackplane]);
    }

    #[test]
    fn pod_scale_memory_access_crosses_racks() {
        let t = topo(ArchitectureKind::PodScale, 2, 2);
        let s = tier_set(&t, TierPolicy::TopTier, FlowKind::CpuMemDown, module(&t, 0), module(&t, 2)).unwrap();
        assert_eq!(s.to_vec(), vec![Tier::InterRack]);
    }

    #[test]
    fn full_path_io_from_disaggregated_module() {
        let t = topo(ArchitectureKind::RackScale, 2, 1);
        let s = tier_set(&t, TierPolicy::FullPath, FlowKind::CpuIoUp, module(&t, 0), Endpoint::Gateway).unwrap();
        assert_eq!(s.to_vec(), vec![Tier::RackBackplane, Tier::InterRack, Tier::InterDc]);
    }

    #[test]
    fn full_path_routes() {
        let trad = topo(ArchitectureKind::Traditional, 4, 2);
        // CPU 0 on board 0 / rack 0, memory 5 on board 1 / rack 1
        let s = tier_set(&trad, TierPolicy::FullPath, FlowKind::CpuMemUp, module(&trad, 0), module(&trad, 5)).unwrap();
        assert_eq!(s.to_vec(), vec![Tier::OnBoard, Tier::OnBoard, Tier::InterRack]);
        let s =
            tier_set(&trad, TierPolicy::FullPath, FlowKind::MemIoDown, Endpoint::Gateway, module(&trad, 4)).unwrap();
        assert_eq!(s.to_vec(), vec![Tier::OnBoard, Tier::InterRack, Tier::InterDc]);

        let rack = topo(ArchitectureKind::RackScale, 4, 2);
        let s = tier_set(&rack, TierPolicy::FullPath, FlowKind::CpuMemUp, module(&rack, 0), module(&rack, 5)).unwrap();
        assert_eq!(s.to_vec(), vec![Tier::RackBackplane, Tier::RackBackplane, Tier::InterRack]);
        assert_eq!(s.top(), Some(Tier::InterRack));
    }

    #[test]
    fn contract_violations() {
        let t = topo(ArchitectureKind::RackScale, 2, 1);
        assert!(matches!(
            tier_set(&t, TierPolicy::TopTier, FlowKind::CpuMemUp, module(&t, 0), Endpoint::Gateway),
            Err(FabricError::Contract(_))
        ));
        assert!(matches!(
            tier_set(&t, TierPolicy::TopTier, FlowKind::MemIoUp, module(&t, 2), module(&t, 0)),
            Err(FabricError::Contract(_))
        ));
        let bogus = Endpoint::Module(Location { module_id: 0, rack: 7, board: None });
        assert!(matches!(
            tier_set(&t, TierPolicy::TopTier, FlowKind::CpuIoUp, bogus, Endpoint::Gateway),
            Err(FabricError::UnknownEndpoint(0))
        ));
    }

    #[test]
    fn traditional_co_located_traffic() {
        let t = topo(ArchitectureKind::Traditional, 1, 1);
        let mut p = Placement::new();
        p.assign(0, 0, 1);
        let traffic = traffic_by_tier(&t, &[wl(0)], &p, TierPolicy::TopTier).unwrap();
        assert_eq!(traffic.on_board, 220.0);
        assert_eq!(traffic.inter_dc, 6.0);
        assert_eq!(traffic.rack_backplane, 0.0);
        assert_eq!(traffic.inter_rack, 0.0);
    }

    #[test]
    fn pod_scale_traffic() {
        let t = topo(ArchitectureKind::PodScale, 2, 2);
        let mut p = Placement::new();
        p.assign(0, 0, 2);
        let traffic = traffic_by_tier(&t, &[wl(0)], &p, TierPolicy::TopTier).unwrap();
        assert_eq!(traffic.inter_rack, 220.0);
        assert_eq!(traffic.inter_dc, 6.0);
        assert_eq!(traffic.total(), 226.0);
    }

    #[test]
    fn no_workloads_no_traffic() {
        let t = topo(ArchitectureKind::RackScale, 2, 1);
        let traffic = traffic_by_tier(&t, &[], &Placement::new(), TierPolicy::FullPath).unwrap();
        assert_eq!(traffic, TrafficByTier::default());
        assert_eq!(network_power_by_tier(&traffic, &t.epb).total_w, 0.0);
    }

    #[test]
    fn network_power_conversion() {
        let epb = EpbTable::default();
        let traffic = TrafficByTier { rack_backplane: 220.0, inter_dc: 6.0, ..Default::default() };
        let p = network_power_by_tier(&traffic, &epb);
        assert_eq!(p.per_tier.rack_backplane, 5.5);
        assert_eq!(p.per_tier.inter_dc, 3.0);
        assert_eq!(p.total_w, 8.5);
    }

    #[test]
    fn unplaced_workload_is_an_error() {
        let t = topo(ArchitectureKind::RackScale, 2, 1);
        assert_eq!(
            traffic_by_tier(&t, &[wl(3)], &Placement::new(), TierPolicy::TopTier),
            Err(FabricError::Unplaced(3))
        );
    }
}
