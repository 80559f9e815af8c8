//! CPLEX LP export of the placement model.
//!
//! Binaries `x_w_c` and `y_w_m` assign workload `w` to CPU `c` and memory `m`,
//! `a_c` and `b_m` mark active modules and `z_w_c_m` linearizes `x_w_c * y_w_m`.
//! The continuous `u_k` carries the load-proportional power of module `k`, tied to the
//! assignment by `CAP * u_k = dynamic * sum(demand * x)`, so no coefficient needs rounding
//! to a repeating decimal.

use std::fmt::Write as _;

use super::model::CostModel;
use super::{MilpInstance, SolveError};

const MAX_LINE: usize = 250;

/// Renders `v` with at most nine significant digits.
fn num(v: f64) -> String {
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded}")
}

/// Writes a linear expression, wrapping before lines get long.
struct Expr {
    lines: Vec<String>,
}

impl Expr {
    fn new(head: String) -> Self {
        Expr { lines: vec![head] }
    }

    fn push_raw(&mut self, piece: String) {
        let last = self.lines.last_mut().expect("at least one line");
        if last.len() + piece.len() > MAX_LINE {
            self.lines.push(format!("   {piece}"));
        } else {
            last.push_str(&piece);
        }
    }

    fn term(&mut self, coef: f64, var: &str) {
        if coef == 0.0 {
            return;
        }
        let sign = if coef < 0.0 { '-' } else { '+' };
        let mag = coef.abs();
        if mag == 1.0 {
            self.push_raw(format!(" {sign} {var}"));
        } else {
            self.push_raw(format!(" {sign} {} {var}", num(mag)));
        }
    }

    fn constant(&mut self, c: f64) {
        if c != 0.0 {
            let sign = if c < 0.0 { '-' } else { '+' };
            self.push_raw(format!(" {sign} {}", num(c.abs())));
        }
    }

    fn finish(mut self, out: &mut String, tail: &str) {
        if !tail.is_empty() {
            self.push_raw(tail.to_string());
        }
        for line in self.lines {
            out.push_str(&line);
            out.push('\n');
        }
    }
}

fn all_equal(values: &[f64]) -> bool {
    values.windows(2).all(|p| p[0].to_bits() == p[1].to_bits())
}

/// The model as CPLEX LP text.
///
/// Io power enters as an objective constant when it is the same for every module, and is
/// folded into the `x` and `y` coefficients otherwise.
pub fn export_lp(instance: &MilpInstance) -> Result<String, SolveError> {
    instance.validate()?;
    let m = CostModel::new(instance)?;
    let ws = &instance.workloads;
    let (nc, nmem) = (m.cpus.len(), m.mems.len());
    let x = |w: u32, c: usize| format!("x_{w}_{}", m.cpus[c]);
    let y = |w: u32, k: usize| format!("y_{w}_{}", m.mems[k]);
    let z = |w: u32, c: usize, k: usize| format!("z_{w}_{}_{}", m.cpus[c], m.mems[k]);
    let a = |c: usize| format!("a_{}", m.cpus[c]);
    let b = |k: usize| format!("b_{}", m.mems[k]);
    let u = |id: u32| format!("u_{id}");
    let dynamic_w = |id: u32| {
        let spec = instance.topology.module(id).expect("cost model lists topology modules").spec;
        spec.dynamic_range * spec.peak_power_w
    };

    let mut out = String::new();
    out.push_str("Minimize\n");
    let mut obj = Expr::new(" obj:".to_string());
    for c in 0..nc {
        obj.term(m.cpu_idle[c], &a(c));
    }
    for k in 0..nmem {
        obj.term(m.mem_idle[k], &b(k));
    }
    for &id in m.cpus.iter().chain(&m.mems) {
        obj.term(1.0, &u(id));
    }

    let mut constant = 0.0;
    for w in ws {
        let cpu_io: Vec<f64> = (0..nc)
            .map(|c| {
                let (u, d) = m.cpu_io_wpg(c);
                w.flows.cpu_io_up * u + w.flows.cpu_io_down * d
            })
            .collect();
        let mem_io: Vec<f64> = (0..nmem)
            .map(|k| {
                let (u, d) = m.mem_io_wpg(k);
                w.flows.mem_io_up * u + w.flows.mem_io_down * d
            })
            .collect();
        let fold_cpu = !all_equal(&cpu_io);
        let fold_mem = !all_equal(&mem_io);
        if !fold_cpu {
            constant += cpu_io.first().copied().unwrap_or(0.0);
        }
        if !fold_mem {
            constant += mem_io.first().copied().unwrap_or(0.0);
        }
        if fold_cpu {
            for (c, &io) in cpu_io.iter().enumerate() {
                obj.term(io, &x(w.id, c));
            }
        }
        if fold_mem {
            for (k, &io) in mem_io.iter().enumerate() {
                obj.term(io, &y(w.id, k));
            }
        }
        for c in 0..nc {
            for k in 0..nmem {
                let (up, down) = m.pair_wpg(c, k);
                obj.term(w.flows.cpu_mem_up * up + w.flows.cpu_mem_down * down, &z(w.id, c, k));
            }
        }
    }
    obj.constant(constant);
    obj.finish(&mut out, "");

    out.push_str("Subject To\n");
    for w in ws {
        let mut e = Expr::new(format!(" assign_cpu_{}:", w.id));
        for c in 0..nc {
            e.term(1.0, &x(w.id, c));
        }
        e.finish(&mut out, " = 1");
        let mut e = Expr::new(format!(" assign_mem_{}:", w.id));
        for k in 0..nmem {
            e.term(1.0, &y(w.id, k));
        }
        e.finish(&mut out, " = 1");
    }
    for c in 0..nc {
        let mut e = Expr::new(format!(" cap_{}:", a(c)));
        for w in ws {
            e.term(f64::from(w.cpu_demand.0), &x(w.id, c));
        }
        e.term(-f64::from(m.cpu_cap[c]), &a(c));
        e.finish(&mut out, " <= 0");
    }
    for k in 0..nmem {
        let mut e = Expr::new(format!(" cap_{}:", b(k)));
        for w in ws {
            e.term(f64::from(w.mem_demand.0), &y(w.id, k));
        }
        e.term(-f64::from(m.mem_cap[k]), &b(k));
        e.finish(&mut out, " <= 0");
    }
    for c in 0..nc {
        let id = m.cpus[c];
        let mut e = Expr::new(format!(" load_{}:", u(id)));
        e.term(f64::from(m.cpu_cap[c]), &u(id));
        for w in ws {
            e.term(-dynamic_w(id) * f64::from(w.cpu_demand.0), &x(w.id, c));
        }
        e.finish(&mut out, " = 0");
    }
    for k in 0..nmem {
        let id = m.mems[k];
        let mut e = Expr::new(format!(" load_{}:", u(id)));
        e.term(f64::from(m.mem_cap[k]), &u(id));
        for w in ws {
            e.term(-dynamic_w(id) * f64::from(w.mem_demand.0), &y(w.id, k));
        }
        e.finish(&mut out, " = 0");
    }
    for w in ws {
        for c in 0..nc {
            for k in 0..nmem {
                let zv = z(w.id, c, k);
                let _ = writeln!(out, " lo_{zv}: {zv} - {} - {} >= -1", x(w.id, c), y(w.id, k));
                let _ = writeln!(out, " hx_{zv}: {zv} - {} <= 0", x(w.id, c));
                let _ = writeln!(out, " hy_{zv}: {zv} - {} <= 0", y(w.id, k));
            }
        }
    }
    for w in ws {
        for c in 0..nc {
            if m.traditional {
                if let Some(k) = m.partner[c] {
                    let _ = writeln!(out, " colo_{}_{}: {} - {} = 0", w.id, m.cpus[c], y(w.id, k), x(w.id, c));
                }
            } else {
                for k in 0..nmem {
                    if !m.allowed(c, k) {
                        let _ = writeln!(out, " pair_{}: {} + {} <= 1", z(w.id, c, k), x(w.id, c), y(w.id, k));
                    }
                }
            }
        }
    }

    let mut vars = Vec::with_capacity(ws.len() * (nc + nmem + nc * nmem) + nc + nmem);
    for w in ws {
        vars.extend((0..nc).map(|c| x(w.id, c)));
        vars.extend((0..nmem).map(|k| y(w.id, k)));
    }
    vars.extend((0..nc).map(a));
    vars.extend((0..nmem).map(b));
    for w in ws {
        for c in 0..nc {
            vars.extend((0..nmem).map(|k| z(w.id, c, k)));
        }
    }

    out.push_str("Bounds\n");
    for v in &vars {
        let _ = writeln!(out, " 0 <= {v} <= 1");
    }
    for &id in m.cpus.iter().chain(&m.mems) {
        let _ = writeln!(out, " {} >= 0", u(id));
    }
    out.push_str("Binary\n");
    let mut e = Expr::new(String::new());
    for v in &vars {
        e.push_raw(format!(" {v}"));
    }
    e.finish(&mut out, "");
    out.push_str("End\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_topology, ArchitectureKind, Deci, EpbTable, FlowRates, ResourceSpec, Workload};
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

    fn binaries(lp: &str) -> Vec<String> {
        let start = lp.lines().position(|l| l == "Binary").unwrap();
        lp.lines()
            .skip(start + 1)
            .take_while(|l| *l != "End")
            .flat_map(|l| l.split_whitespace().map(str::to_string).collect::<Vec<_>>())
            .collect()
    }

    #[test]
    fn sections_in_order() {
        let lp = export_lp(&instance(ArchitectureKind::PodScale, 2, 2, &[(20, 60), (20, 60)])).unwrap();
        assert!(lp.starts_with("Minimize\n"));
        let pos = |s: &str| lp.lines().position(|l| l == s).unwrap();
        assert!(pos("Minimize") < pos("Subject To"));
        assert!(pos("Subject To") < pos("Bounds"));
        assert!(pos("Bounds") < pos("Binary"));
        assert!(pos("Binary") < pos("End"));
        assert!(lp.ends_with("End\n"));
    }

    #[test]
    fn binary_count_formula() {
        let lp = export_lp(&instance(ArchitectureKind::PodScale, 2, 2, &[(20, 60), (20, 60)])).unwrap();
        assert_eq!(binaries(&lp).len(), 2 * (2 + 2) + 2 + 2 + 2 * 2 * 2);
    }

    #[test]
    fn lines_stay_short() {
        let ws: Vec<(u32, u32)> = (0..20).map(|i| (10 + i, 50 + i)).collect();
        let lp = export_lp(&instance(ArchitectureKind::RackScale, 20, 2, &ws)).unwrap();
        assert!(lp.lines().all(|l| l.len() <= 255));
        assert!(!lp.contains('\r'));
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(num(39.0 / 36.0 * 20.0), "21.6666667");
        assert_eq!(num(91.0), "91");
        assert_eq!(num(5.5), "5.5");
        assert_eq!(num(0.05), "0.05");
    }

    #[test]
    fn load_power_rows_keep_exact_coefficients() {
        let lp = export_lp(&instance(ArchitectureKind::RackScale, 1, 1, &[(13, 70)])).unwrap();
        // 0.3 * 130 W spread over 36 deci-GHz is a repeating decimal; 36 u = 39 * 13 x is not
        assert!(lp.contains(" load_u_0: + 36 u_0 - 507 x_0_0 = 0\n"));
        assert!(lp.contains(" load_u_1: + 240 u_1 - 840 y_0_1 = 0\n"));
        assert!(lp.contains(" obj: + 91 a_0 + 28 b_1 + u_0 + u_1 + 5.5 z_0_0_1 + 3\n"));
        assert!(lp.contains(" u_0 >= 0\n"));
    }

    #[test]
    fn traditional_pins_memory_to_board() {
        let lp = export_lp(&instance(ArchitectureKind::Traditional, 2, 1, &[(20, 60)])).unwrap();
        assert!(lp.contains(" colo_0_0: y_0_2 - x_0_0 = 0\n"));
        assert!(lp.contains(" colo_0_1: y_0_3 - x_0_1 = 0\n"));
    }

    #[test]
    fn same_rack_rule_adds_pair_cuts() {
        let inst = instance(ArchitectureKind::RackScale, 2, 2, &[(20, 60)]).with_cross_rack(false);
        let lp = export_lp(&inst).unwrap();
        // CPU 0 and memory 3 sit in different racks
        assert!(lp.contains(" pair_z_0_0_3: x_0_0 + y_0_3 <= 1\n"));
        assert!(!lp.contains("pair_z_0_0_2"));
    }
}
