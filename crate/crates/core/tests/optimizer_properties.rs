use dcplace::domain::{build_topology, ArchitectureKind, Deci, EpbTable, FlowRates, Placement, ResourceSpec, Workload};
use dcplace::fabric::TierPolicy;
use dcplace::optimizer::{
    brute_force_oracle, evaluate, objective_value, optimal_placements, solve_exact, solve_greedy, Limits, MilpInstance,
    SolveError,
};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Case {
    kind: ArchitectureKind,
    n: u32,
    racks: u32,
    policy: TierPolicy,
    cross_rack: bool,
    ws: Vec<(u32, u32)>,
}

impl Case {
    fn instance_with(&self, k: f64) -> MilpInstance {
        let scale = |s: ResourceSpec| ResourceSpec { peak_power_w: s.peak_power_w * k, ..s };
        let t = build_topology(
            self.kind,
            self.n,
            self.n,
            self.racks,
            scale(ResourceSpec::reference_cpu()),
            scale(ResourceSpec::reference_mem()),
            EpbTable::default().scaled(k),
        )
        .unwrap();
        let ws = self
            .ws
            .iter()
            .enumerate()
            .map(|(i, &(c, m))| Workload::new(i as u32, Deci(c), Deci(m), FlowRates::reference()).unwrap())
            .collect();
        MilpInstance::new(t, ws, self.policy).unwrap().with_cross_rack(self.cross_rack)
    }

    fn instance(&self) -> MilpInstance {
        self.instance_with(1.0)
    }
}

fn case(max_modules: u32, max_workloads: usize) -> impl Strategy<Value = Case> {
    (
        0..3usize,
        1..=max_modules,
        1u32..=8,
        any::<bool>(),
        any::<bool>(),
        prop::collection::vec((5u32..=36, 20u32..=240), 0..=max_workloads),
    )
        .prop_map(|(k, n, r, full, cross_rack, ws)| {
            let kind = ArchitectureKind::ALL[k];
            let racks = match kind {
                ArchitectureKind::PodScale => 2 + (r - 1) % (2 * n - 1),
                _ => 1 + (r - 1) % n,
            };
            let policy = if full { TierPolicy::FullPath } else { TierPolicy::TopTier };
            Case { kind, n, racks, policy, cross_rack, ws }
        })
}

fn exact(instance: &MilpInstance) -> Result<dcplace::optimizer::SolveResult, SolveError> {
    solve_exact(instance, Limits::default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn exact_matches_oracle(c in case(4, 6)) {
        let inst = c.instance();
        match (exact(&inst), brute_force_oracle(&inst)) {
            (Ok(e), Ok(o)) => {
                prop_assert!(e.proven_optimal);
                prop_assert!((e.objective_w - o.objective_w).abs() <= 1e-9, "exact {} oracle {}", e.objective_w, o.objective_w);
            }
            (Err(SolveError::Infeasible), Err(SolveError::Infeasible)) => {}
            (e, o) => prop_assert!(false, "exact {:?} vs oracle {:?}", e, o),
        }
    }

    #[test]
    fn greedy_never_beats_exact(c in case(4, 6)) {
        let inst = c.instance();
        if let Ok(g) = solve_greedy(&inst) {
            let e = exact(&inst).expect("greedy found a placement, so the instance is feasible");
            prop_assert!(g.objective_w >= e.objective_w - 1e-9);
        }
    }

    #[test]
    fn exact_beats_every_optimal_candidate(c in case(3, 5)) {
        let inst = c.instance();
        if let Ok(e) = exact(&inst) {
            for p in optimal_placements(&inst).unwrap() {
                prop_assert!(e.objective_w <= objective_value(&inst, &p).unwrap() + 1e-9);
            }
        }
    }

    #[test]
    fn exact_is_deterministic(c in case(4, 8)) {
        let inst = c.instance();
        let a = exact(&inst);
        let b = exact(&inst);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.placement.encoding(), b.placement.encoding());
                prop_assert_eq!(a.objective_w.to_bits(), b.objective_w.to_bits());
                prop_assert_eq!(a.nodes_explored, b.nodes_explored);
                prop_assert_eq!(a.proven_optimal, b.proven_optimal);
            }
            (a, b) => prop_assert_eq!(a.err(), b.err()),
        }
    }

    #[test]
    fn argmin_is_scale_invariant(c in case(3, 4), k in 0.1f64..10.0) {
        let base = c.instance();
        let scaled = c.instance_with(k);
        match (optimal_placements(&base), optimal_placements(&scaled)) {
            (Ok(a), Ok(b)) => {
                let enc = |ps: &[Placement]| ps.iter().map(Placement::encoding).collect::<Vec<_>>();
                prop_assert_eq!(enc(&a), enc(&b));
                let ob = brute_force_oracle(&base).unwrap().objective_w;
                let os = brute_force_oracle(&scaled).unwrap().objective_w;
                prop_assert!((os - k * ob).abs() <= 1e-9 * (k * ob).abs().max(1.0));
            }
            (Err(a), Err(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn solutions_are_feasible_and_consistent(c in case(4, 8)) {
        let inst = c.instance();
        for r in [exact(&inst), solve_greedy(&inst)].into_iter().flatten() {
            let report = evaluate(&inst, &r.placement).unwrap();
            prop_assert_eq!(r.placement.len(), inst.workloads.len());
            prop_assert_eq!(report.total_w.to_bits(), r.objective_w.to_bits());
        }
    }
}
