use std::time::Instant;

use super::model::CostModel;
use super::{finish, MilpInstance, SolveError, SolveResult};
use crate::domain::{Placement, Workload};

/// Workload indices by descending CPU demand, ties by id.
pub(crate) fn canonical_order(workloads: &[Workload]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..workloads.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(workloads[i].cpu_demand), workloads[i].id));
    order
}

/// Picks the cheapest candidate among already-open modules, falling back to closed ones.
/// Ties go to the lowest position.
fn pick(candidates: impl Iterator<Item = (usize, bool, f64)>) -> Option<usize> {
    let mut best_open: Option<(usize, f64)> = None;
    let mut best_new: Option<(usize, f64)> = None;
    for (pos, open, cost) in candidates {
        let slot = if open { &mut best_open } else { &mut best_new };
        if slot.is_none_or(|(_, c)| cost < c) {
            *slot = Some((pos, cost));
        }
    }
    best_open.or(best_new).map(|(pos, _)| pos)
}

/// First-fit-decreasing placement: each workload, largest CPU demand first, takes the
/// CPU and then the memory module with the smallest marginal power increase.
pub fn solve_greedy(instance: &MilpInstance) -> Result<SolveResult, SolveError> {
    let started = Instant::now();
    instance.validate()?;
    let model = CostModel::new(instance)?;
    let assignment = greedy_assignment(instance, &model)?;
    let placement: Placement = assignment
        .iter()
        .zip(&instance.workloads)
        .map(|(&(ci, mi), w)| crate::domain::Assignment { workload: w.id, cpu: model.cpus[ci], mem: model.mems[mi] })
        .collect();
    finish(instance, placement, false, 0, started)
}

/// Greedy positions `(cpu, mem)` for each workload, in instance order.
pub(crate) fn greedy_assignment(instance: &MilpInstance, model: &CostModel) -> Result<Vec<(usize, usize)>, SolveError> {
    let ws = &instance.workloads;
    let mut cpu_load = vec![0u32; model.cpus.len()];
    let mut mem_load = vec![0u32; model.mems.len()];
    let mut out = vec![(usize::MAX, usize::MAX); ws.len()];

    for i in canonical_order(ws) {
        let w = &ws[i];
        let (d, md) = (w.cpu_demand.0, w.mem_demand.0);
        let (ci, mi) = if model.traditional {
            let server = pick((0..model.cpus.len()).filter_map(|ci| {
                let mi = model.partner[ci]?;
                if cpu_load[ci] + d > model.cpu_cap[ci] || mem_load[mi] + md > model.mem_cap[mi] {
                    return None;
                }
                let open = cpu_load[ci] > 0;
                let idle = if open { 0.0 } else { model.cpu_idle[ci] + model.mem_idle[mi] };
                Some((ci, open, idle + model.assign_cost(w, ci, mi)))
            }))
            .ok_or(SolveError::HeuristicDeadEnd { workload: w.id })?;
            (server, model.partner[server].expect("server has a memory module"))
        } else {
            let ci = pick((0..model.cpus.len()).filter_map(|ci| {
                if cpu_load[ci] + d > model.cpu_cap[ci] {
                    return None;
                }
                let open = cpu_load[ci] > 0;
                let idle = if open { 0.0 } else { model.cpu_idle[ci] };
                Some((ci, open, idle + model.cpu_wpd[ci] * f64::from(d)))
            }))
            .ok_or(SolveError::HeuristicDeadEnd { workload: w.id })?;
            let mi = pick((0..model.mems.len()).filter_map(|mi| {
                if mem_load[mi] + md > model.mem_cap[mi] || !model.allowed(ci, mi) {
                    return None;
                }
                let open = mem_load[mi] > 0;
                let idle = if open { 0.0 } else { model.mem_idle[mi] };
                Some((mi, open, idle + model.mem_wpd[mi] * f64::from(md) + model.network(w, ci, mi)))
            }))
            .ok_or(SolveError::HeuristicDeadEnd { workload: w.id })?;
            (ci, mi)
        };
        cpu_load[ci] += d;
        mem_load[mi] += md;
        out[i] = (ci, mi);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_topology, ArchitectureKind, Deci, EpbTable, FlowRates, ResourceSpec};
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
    fn shares_memory_on_rack_scale() {
        let inst = instance(ArchitectureKind::RackScale, 2, 1, &[(20, 60), (20, 60)]);
        let r = solve_greedy(&inst).unwrap();
        assert_eq!(r.placement.get(0), Some((0, 2)));
        assert_eq!(r.placement.get(1), Some((1, 2)));
        assert!((r.objective_w - 276.333_333_333_333_3).abs() < 1e-9);
        assert!(!r.proven_optimal);
    }

    #[test]
    fn ffd_opens_three_cpus() {
        let inst = instance(ArchitectureKind::PodScale, 4, 2, &[(19, 50), (19, 50), (18, 50), (18, 50)]);
        let r = solve_greedy(&inst).unwrap();
        let report = super::super::evaluate(&inst, &r.placement).unwrap();
        assert_eq!(report.active_cpus, 3);
        assert_eq!(report.active_mems, 1);
    }

    #[test]
    fn dead_end_is_reported() {
        // three 3.0 GHz workloads on two CPUs
        let inst = instance(ArchitectureKind::RackScale, 2, 1, &[(30, 50), (30, 50), (30, 50)]);
        assert_eq!(solve_greedy(&inst).unwrap_err(), SolveError::HeuristicDeadEnd { workload: 2 });
    }

    #[test]
    fn traditional_keeps_workloads_on_one_server() {
        let inst = instance(ArchitectureKind::Traditional, 3, 1, &[(20, 60), (10, 80), (15, 50)]);
        let r = solve_greedy(&inst).unwrap();
        for a in r.placement.iter() {
            assert_eq!(a.mem, a.cpu + 3);
        }
    }
}
