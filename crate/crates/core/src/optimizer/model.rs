//! Cost tables shared by the exact, greedy and LP back ends.

use std::collections::{BTreeMap, HashMap};

use crate::domain::{ArchitectureKind, FlowKind, ResourceKind, Workload};
use crate::fabric::{flow_endpoints, tier_set, Endpoint};

use super::{MilpInstance, SolveError};

/// Per-module and per-pair coefficients indexed by position in `cpus` / `mems`.
pub(crate) struct CostModel {
    pub traditional: bool,
    pub cpus: Vec<u32>,
    pub mems: Vec<u32>,
    pub cpu_cap: Vec<u32>,
    pub mem_cap: Vec<u32>,
    pub cpu_idle: Vec<f64>,
    pub mem_idle: Vec<f64>,
    pub cpu_wpd: Vec<f64>,
    pub mem_wpd: Vec<f64>,
    /// W/Gbps of the CPU-to-memory and memory-to-CPU flows for each (cpu, mem) pair.
    pair_up: Vec<f64>,
    pair_down: Vec<f64>,
    allowed: Vec<bool>,
    cpu_io: Vec<(f64, f64)>,
    mem_io: Vec<(f64, f64)>,
    /// Memory position on the same board (traditional only).
    pub partner: Vec<Option<usize>>,
    /// Interchangeable-module classes; for traditional topologies the CPU classes are server classes.
    pub cpu_class: Vec<usize>,
    pub mem_class: Vec<usize>,
    pub cpu_classes: Vec<Vec<usize>>,
    pub mem_classes: Vec<Vec<usize>>,
    pub cpu_rack: Vec<usize>,
    pub mem_rack: Vec<usize>,
    /// Identical-rack groups, only used when swapping whole racks preserves every cost.
    pub rack_group: Vec<usize>,
    pub rack_symmetry: bool,
}

fn wpg(instance: &MilpInstance, kind: FlowKind, src: Endpoint, dst: Endpoint) -> Result<f64, SolveError> {
    tier_set(&instance.topology, instance.policy, kind, src, dst)
        .map(|t| t.watts_per_gbps(&instance.topology.epb))
        .map_err(|e| SolveError::Instance(e.to_string()))
}

fn group_by_key<K: Ord>(keys: Vec<K>) -> (Vec<usize>, Vec<Vec<usize>>) {
    let mut ids: BTreeMap<K, usize> = BTreeMap::new();
    let mut class_of = Vec::with_capacity(keys.len());
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (i, k) in keys.into_iter().enumerate() {
        let next = ids.len();
        let c = *ids.entry(k).or_insert(next);
        if c == classes.len() {
            classes.push(Vec::new());
        }
        classes[c].push(i);
        class_of.push(c);
    }
    (class_of, classes)
}

impl CostModel {
    pub fn new(instance: &MilpInstance) -> Result<Self, SolveError> {
        let t = &instance.topology;
        let cpu_mods: Vec<_> = t.modules_of(ResourceKind::Cpu).collect();
        let mem_mods: Vec<_> = t.modules_of(ResourceKind::Mem).collect();
        let (nc, nm) = (cpu_mods.len(), mem_mods.len());
        let traditional = t.kind == ArchitectureKind::Traditional;

        let mut pair_up = vec![0.0; nc * nm];
        let mut pair_down = vec![0.0; nc * nm];
        let mut allowed = vec![false; nc * nm];
        for (ci, c) in cpu_mods.iter().enumerate() {
            for (mi, m) in mem_mods.iter().enumerate() {
                let (a, b) = flow_endpoints(FlowKind::CpuMemUp, c.location(), m.location());
                pair_up[ci * nm + mi] = wpg(instance, FlowKind::CpuMemUp, a, b)?;
                let (a, b) = flow_endpoints(FlowKind::CpuMemDown, c.location(), m.location());
                pair_down[ci * nm + mi] = wpg(instance, FlowKind::CpuMemDown, a, b)?;
                allowed[ci * nm + mi] = instance.pair_allowed(c.id, m.id);
            }
        }
        let io = |loc, up: FlowKind, down: FlowKind| -> Result<(f64, f64), SolveError> {
            Ok((
                wpg(instance, up, Endpoint::Module(loc), Endpoint::Gateway)?,
                wpg(instance, down, Endpoint::Gateway, Endpoint::Module(loc))?,
            ))
        };
        let cpu_io = cpu_mods
            .iter()
            .map(|c| io(c.location(), FlowKind::CpuIoUp, FlowKind::CpuIoDown))
            .collect::<Result<Vec<_>, _>>()?;
        let mem_io = mem_mods
            .iter()
            .map(|m| io(m.location(), FlowKind::MemIoUp, FlowKind::MemIoDown))
            .collect::<Result<Vec<_>, _>>()?;

        let partner: Vec<Option<usize>> = cpu_mods
            .iter()
            .map(|c| {
                if !traditional {
                    return None;
                }
                mem_mods.iter().position(|m| m.board.is_some() && m.board == c.board)
            })
            .collect();

        let spec_key =
            |s: &crate::domain::ResourceSpec| (s.capacity.0, s.peak_power_w.to_bits(), s.dynamic_range.to_bits());

        let (cpu_class, cpu_classes, mem_class, mem_classes) = if traditional {
            // a server swap moves both modules, so classes are keyed on the pair
            let keys: Vec<_> = cpu_mods
                .iter()
                .enumerate()
                .map(|(ci, c)| {
                    let mi = partner[ci];
                    let pair = mi.map(|mi| {
                        (
                            spec_key(&mem_mods[mi].spec),
                            pair_up[ci * nm + mi].to_bits(),
                            pair_down[ci * nm + mi].to_bits(),
                            mem_io[mi].0.to_bits(),
                            mem_io[mi].1.to_bits(),
                        )
                    });
                    (spec_key(&c.spec), cpu_io[ci].0.to_bits(), cpu_io[ci].1.to_bits(), pair)
                })
                .collect();
            let (cc, ccs) = group_by_key(keys);
            let (mc, mcs) = group_by_key((0..nm).collect::<Vec<_>>());
            (cc, ccs, mc, mcs)
        } else {
            let cpu_keys: Vec<_> = cpu_mods
                .iter()
                .enumerate()
                .map(|(ci, c)| {
                    let row: Vec<_> = (0..nm)
                        .map(|mi| {
                            (pair_up[ci * nm + mi].to_bits(), pair_down[ci * nm + mi].to_bits(), allowed[ci * nm + mi])
                        })
                        .collect();
                    (spec_key(&c.spec), cpu_io[ci].0.to_bits(), cpu_io[ci].1.to_bits(), row)
                })
                .collect();
            let mem_keys: Vec<_> = mem_mods
                .iter()
                .enumerate()
                .map(|(mi, m)| {
                    let col: Vec<_> = (0..nc)
                        .map(|ci| {
                            (pair_up[ci * nm + mi].to_bits(), pair_down[ci * nm + mi].to_bits(), allowed[ci * nm + mi])
                        })
                        .collect();
                    (spec_key(&m.spec), mem_io[mi].0.to_bits(), mem_io[mi].1.to_bits(), col)
                })
                .collect();
            let (cc, ccs) = group_by_key(cpu_keys);
            let (mc, mcs) = group_by_key(mem_keys);
            (cc, ccs, mc, mcs)
        };

        let rack_pos: HashMap<u32, usize> = t.racks.iter().enumerate().map(|(i, &r)| (r, i)).collect();
        let cpu_rack: Vec<usize> = cpu_mods.iter().map(|c| rack_pos[&c.rack]).collect();
        let mem_rack: Vec<usize> = mem_mods.iter().map(|m| rack_pos[&m.rack]).collect();

        // Rack-scale costs depend only on same-rack versus different-rack, so racks
        // with identical contents can be permuted freely.
        let rack_symmetry = t.kind == ArchitectureKind::RackScale;
        let rack_keys: Vec<_> = t
            .racks
            .iter()
            .map(|&r| {
                let mut specs: Vec<_> =
                    t.modules.iter().filter(|m| m.rack == r).map(|m| (m.kind(), spec_key(&m.spec))).collect();
                specs.sort();
                specs
            })
            .collect();
        let (rack_group, _) = group_by_key(rack_keys);

        Ok(CostModel {
            traditional,
            cpus: cpu_mods.iter().map(|m| m.id).collect(),
            mems: mem_mods.iter().map(|m| m.id).collect(),
            cpu_cap: cpu_mods.iter().map(|m| m.spec.capacity.0).collect(),
            mem_cap: mem_mods.iter().map(|m| m.spec.capacity.0).collect(),
            cpu_idle: cpu_mods.iter().map(|m| m.spec.idle_power_w()).collect(),
            mem_idle: mem_mods.iter().map(|m| m.spec.idle_power_w()).collect(),
            cpu_wpd: cpu_mods.iter().map(|m| m.spec.watts_per_deci()).collect(),
            mem_wpd: mem_mods.iter().map(|m| m.spec.watts_per_deci()).collect(),
            pair_up,
            pair_down,
            allowed,
            cpu_io,
            mem_io,
            partner,
            cpu_class,
            mem_class,
            cpu_classes,
            mem_classes,
            cpu_rack,
            mem_rack,
            rack_group,
            rack_symmetry,
        })
    }

    pub fn nm(&self) -> usize {
        self.mems.len()
    }

    pub fn allowed(&self, ci: usize, mi: usize) -> bool {
        self.allowed[ci * self.nm() + mi]
    }

    /// W per Gbps on the CPU-memory route of the pair, per direction.
    pub fn pair_wpg(&self, ci: usize, mi: usize) -> (f64, f64) {
        let k = ci * self.nm() + mi;
        (self.pair_up[k], self.pair_down[k])
    }

    pub fn cpu_io_wpg(&self, ci: usize) -> (f64, f64) {
        self.cpu_io[ci]
    }

    pub fn mem_io_wpg(&self, mi: usize) -> (f64, f64) {
        self.mem_io[mi]
    }

    /// Network watts of one workload placed on `(ci, mi)`.
    pub fn network(&self, w: &Workload, ci: usize, mi: usize) -> f64 {
        let (up, down) = self.pair_wpg(ci, mi);
        let (cu, cd) = self.cpu_io[ci];
        let (mu, md) = self.mem_io[mi];
        w.flows.cpu_mem_up * up
            + w.flows.cpu_mem_down * down
            + w.flows.cpu_io_up * cu
            + w.flows.cpu_io_down * cd
            + w.flows.mem_io_up * mu
            + w.flows.mem_io_down * md
    }

    /// Load-proportional plus network watts of one workload; idle power is not included.
    pub fn assign_cost(&self, w: &Workload, ci: usize, mi: usize) -> f64 {
        self.cpu_wpd[ci] * f64::from(w.cpu_demand.0)
            + self.mem_wpd[mi] * f64::from(w.mem_demand.0)
            + self.network(w, ci, mi)
    }
}
