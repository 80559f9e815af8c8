//! Exhaustive enumeration of placements for small instances.

use std::time::Instant;

use super::{finish, MilpInstance, SolveError, SolveResult};
use crate::domain::{FlowKind, Module, Placement, ResourceKind};
use crate::fabric::{flow_endpoints, tier_set};
use crate::power::resource_power;

pub const ORACLE_MAX_WORKLOADS: usize = 8;
pub const ORACLE_MAX_MODULES_PER_KIND: usize = 10;

type Visit<'v> = dyn FnMut(&[(usize, usize)], f64) + 'v;

struct Enumerator<'a> {
    instance: &'a MilpInstance,
    cpus: Vec<&'a Module>,
    mems: Vec<&'a Module>,
    /// Workload positions sorted by id.
    order: Vec<usize>,
    /// Network watts of workload position `w` on pair (c, m): `net[w][c][m]`.
    net: Vec<Vec<Vec<f64>>>,
    cpu_load: Vec<u32>,
    mem_load: Vec<u32>,
    cur: Vec<(usize, usize)>,
    leaves: u64,
}

impl<'a> Enumerator<'a> {
    fn new(instance: &'a MilpInstance) -> Result<Self, SolveError> {
        let t = &instance.topology;
        let cpus: Vec<&Module> = t.modules_of(ResourceKind::Cpu).collect();
        let mems: Vec<&Module> = t.modules_of(ResourceKind::Mem).collect();
        let ws = &instance.workloads;
        if ws.len() > ORACLE_MAX_WORKLOADS || cpus.len().max(mems.len()) > ORACLE_MAX_MODULES_PER_KIND {
            return Err(SolveError::TooLarge { workloads: ws.len(), max_modules: cpus.len().max(mems.len()) });
        }
        let mut order: Vec<usize> = (0..ws.len()).collect();
        order.sort_by_key(|&i| ws[i].id);

        let mut net = Vec::with_capacity(ws.len());
        for w in ws {
            let mut per_cpu = Vec::with_capacity(cpus.len());
            for c in &cpus {
                let mut per_mem = Vec::with_capacity(mems.len());
                for m in &mems {
                    let mut watts = 0.0;
                    for kind in FlowKind::ALL {
                        let (src, dst) = flow_endpoints(kind, c.location(), m.location());
                        let tiers = tier_set(t, instance.policy, kind, src, dst)
                            .map_err(|e| SolveError::Instance(e.to_string()))?;
                        for tier in tiers.to_vec() {
                            watts += w.flows.get(kind) * t.epb.get(tier) / 1000.0;
                        }
                    }
                    per_mem.push(watts);
                }
                per_cpu.push(per_mem);
            }
            net.push(per_cpu);
        }
        Ok(Enumerator {
            instance,
            cpu_load: vec![0; cpus.len()],
            mem_load: vec![0; mems.len()],
            cur: vec![(0, 0); ws.len()],
            cpus,
            mems,
            order,
            net,
            leaves: 0,
        })
    }

    fn module_power(&self) -> f64 {
        let mut total = 0.0;
        for (m, &load) in self.cpus.iter().zip(&self.cpu_load).chain(self.mems.iter().zip(&self.mem_load)) {
            if load > 0 {
                let u = f64::from(load) / f64::from(m.spec.capacity.0);
                total += resource_power(&m.spec, u).expect("capacity pruning keeps utilization in range");
            }
        }
        total
    }

    /// Calls `visit(cur, objective)` for every capacity-feasible complete assignment,
    /// in lexicographic (workload id, CPU id, memory id) order.
    fn run(&mut self, depth: usize, network: f64, visit: &mut Visit<'_>) {
        if depth == self.order.len() {
            self.leaves += 1;
            let objective = self.module_power() + network;
            visit(&self.cur, objective);
            return;
        }
        let w = &self.instance.workloads[self.order[depth]];
        let (d, md) = (w.cpu_demand.0, w.mem_demand.0);
        for ci in 0..self.cpus.len() {
            if self.cpu_load[ci] + d > self.cpus[ci].spec.capacity.0 {
                continue;
            }
            for mi in 0..self.mems.len() {
                if self.mem_load[mi] + md > self.mems[mi].spec.capacity.0
                    || !self.instance.pair_allowed(self.cpus[ci].id, self.mems[mi].id)
                {
                    continue;
                }
                self.cpu_load[ci] += d;
                self.mem_load[mi] += md;
                self.cur[depth] = (ci, mi);
                let n = self.net[self.order[depth]][ci][mi];
                self.run(depth + 1, network + n, visit);
                self.cpu_load[ci] -= d;
                self.mem_load[mi] -= md;
            }
        }
    }

    fn placement(&self, cur: &[(usize, usize)]) -> Placement {
        let mut p = Placement::new();
        for (d, &(ci, mi)) in cur.iter().enumerate() {
            p.assign(self.instance.workloads[self.order[d]].id, self.cpus[ci].id, self.mems[mi].id);
        }
        p
    }
}

fn tolerance(best: f64) -> f64 {
    if best.is_finite() {
        1e-9 * best.abs().max(1.0)
    } else {
        0.0
    }
}

/// Global optimum by exhaustive enumeration, pruned only by capacity.
///
/// Among placements within tolerance of the optimum, the lexicographically smallest
/// encoding is returned.
pub fn brute_force_oracle(instance: &MilpInstance) -> Result<SolveResult, SolveError> {
    let started = Instant::now();
    instance.validate()?;
    let mut e = Enumerator::new(instance)?;
    let mut best = f64::INFINITY;
    let mut best_cur: Option<Vec<(usize, usize)>> = None;
    e.run(0, 0.0, &mut |cur, obj| {
        if obj < best - tolerance(best) {
            best = obj;
            best_cur = Some(cur.to_vec());
        }
    });
    let cur = best_cur.ok_or(SolveError::Infeasible)?;
    let placement = e.placement(&cur);
    finish(instance, placement, true, e.leaves, started)
}

/// Every placement whose objective is within relative `1e-9` of the optimum, in encoding order.
pub fn optimal_placements(instance: &MilpInstance) -> Result<Vec<Placement>, SolveError> {
    instance.validate()?;
    let mut e = Enumerator::new(instance)?;
    let mut all: Vec<(Vec<(usize, usize)>, f64)> = Vec::new();
    let mut best = f64::INFINITY;
    e.run(0, 0.0, &mut |cur, obj| {
        if obj <= best + tolerance(best) {
            best = best.min(obj);
            all.push((cur.to_vec(), obj));
        }
    });
    if all.is_empty() {
        return Err(SolveError::Infeasible);
    }
    Ok(all.into_iter().filter(|(_, obj)| *obj <= best + tolerance(best)).map(|(cur, _)| e.placement(&cur)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_topology, ArchitectureKind, Deci, EpbTable, FlowRates, ResourceSpec, Tier, Workload};
    use crate::fabric::TierPolicy;

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
    fn empty_instance_costs_nothing() {
        let r = brute_force_oracle(&instance(ArchitectureKind::PodScale, 2, 2, &[])).unwrap();
        assert_eq!(r.objective_w, 0.0);
        assert!(r.placement.is_empty());
    }

    #[test]
    fn pod_scale_pair_shares_memory_across_racks() {
        let inst = instance(ArchitectureKind::PodScale, 2, 2, &[(20, 60), (20, 60)]);
        let r = brute_force_oracle(&inst).unwrap();
        assert_eq!(r.placement.get(0), Some((0, 2)));
        assert_eq!(r.placement.get(1), Some((1, 2)));
        let report = super::super::evaluate(&inst, &r.placement).unwrap();
        assert_eq!(report.active_mems, 1);
        assert!((report.tier(Tier::InterRack).traffic_gbps - 440.0).abs() < 1e-12);
        // of the 2 x 2 x 2 x 2 raw assignments, the 8 putting both CPUs on one module overflow it
        assert_eq!(r.nodes_explored, 8);
    }

    #[test]
    fn rack_scale_example_value() {
        let inst = instance(ArchitectureKind::RackScale, 2, 1, &[(20, 60), (20, 60)]);
        let r = brute_force_oracle(&inst).unwrap();
        assert!((r.objective_w - 276.333_333_333_333_3).abs() < 1e-9);
        // CPU pairs {0,1} and {1,0} times either shared memory module
        assert_eq!(optimal_placements(&inst).unwrap().len(), 4);
    }

    #[test]
    fn refuses_large_instances() {
        let ws: Vec<(u32, u32)> = (0..9).map(|_| (10, 50)).collect();
        let inst = instance(ArchitectureKind::PodScale, 10, 2, &ws);
        assert!(matches!(brute_force_oracle(&inst), Err(SolveError::TooLarge { .. })));
        let inst = instance(ArchitectureKind::PodScale, 11, 2, &[(10, 50)]);
        assert!(matches!(brute_force_oracle(&inst), Err(SolveError::TooLarge { .. })));
    }

    #[test]
    fn infeasible_when_nothing_fits() {
        let inst = instance(ArchitectureKind::RackScale, 2, 1, &[(30, 50), (30, 50), (30, 50)]);
        assert_eq!(brute_force_oracle(&inst).unwrap_err(), SolveError::Infeasible);
    }
}
