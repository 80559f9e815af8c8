//! Depth-first branch-and-bound over joint (CPU, memory) choices.
//!
//! Workloads are branched in canonical order (descending CPU demand, then id).
//! The bound at a node is the cost so far plus each remaining workload's cheapest
//! load-and-network cost plus an idle-power bound from bin-packing arguments.

use std::collections::HashMap;
use std::time::Instant;

use super::binpack::{min_bins, min_extra_bins, ExtraBins};
use super::greedy::{canonical_order, greedy_assignment};
use super::model::CostModel;
use super::{finish, Limits, MilpInstance, SolveError, SolveResult};
use crate::domain::{Assignment, Placement, Workload};

const ROOT_BINPACK_NODES: u64 = 1_000_000;
const TIME_CHECK_INTERVAL: u64 = 1024;
const EXTRA_BINPACK_NODES: u64 = 20_000;
const EXTRA_CACHE_LIMIT: usize = 2_000_000;

fn tolerance(best: f64) -> f64 {
    if best.is_finite() {
        1e-9 * best.abs().max(1.0)
    } else {
        0.0
    }
}

/// Per-kind view used by the idle bound.
struct KindState<'a> {
    load: &'a [u32],
    cap: &'a [u32],
    idle: &'a [f64],
    resid_sum: u64,
    open: usize,
}

/// Cheap count of modules that must still be opened.
struct Extra {
    count: u64,
    closed: u64,
    cap_max: u32,
    min_idle: f64,
}

/// Additional modules that must still be opened, from volume, large items and the root bin count.
/// `None` when more modules are needed than remain closed.
fn extra_modules(k: &KindState<'_>, remaining: &[u32], remaining_sum: u64, root_bins: u32) -> Option<Extra> {
    let mut max_resid = 0u32;
    let mut cap_max = 0u32;
    let mut min_idle = f64::INFINITY;
    for i in 0..k.load.len() {
        if k.load[i] > 0 {
            max_resid = max_resid.max(k.cap[i] - k.load[i]);
        } else {
            cap_max = cap_max.max(k.cap[i]);
            min_idle = min_idle.min(k.idle[i]);
        }
    }
    let closed = (k.load.len() - k.open) as u64;
    let overflow = remaining_sum.saturating_sub(k.resid_sum);
    let by_volume = if overflow == 0 {
        0
    } else if cap_max == 0 {
        return None;
    } else {
        overflow.div_ceil(u64::from(cap_max))
    };
    let big = remaining.iter().take_while(|&&s| s > max_resid && 2 * u64::from(s) > u64::from(cap_max)).count() as u64;
    let by_root = u64::from(root_bins).saturating_sub(k.open as u64);
    let count = by_volume.max(big).max(by_root);
    if count > closed {
        return None;
    }
    Some(Extra { count, closed, cap_max, min_idle })
}

type ExtraCache = HashMap<(usize, Vec<u32>), ExtraBins>;

/// Tightens `quick` with an exact packing of the remaining items into open residuals plus new modules.
fn refine_extra(
    cache: &mut ExtraCache,
    k: &KindState<'_>,
    depth: usize,
    remaining: &[u32],
    quick: Extra,
) -> Option<Extra> {
    let Some(&smallest) = remaining.last() else {
        return Some(quick);
    };
    if quick.cap_max == 0 {
        return Some(quick);
    }
    let mut resid: Vec<u32> =
        (0..k.load.len()).filter(|&i| k.load[i] > 0).map(|i| k.cap[i] - k.load[i]).filter(|&r| r >= smallest).collect();
    resid.sort_unstable_by(|a, b| b.cmp(a));
    let key = (depth, resid);
    let result = match cache.get(&key) {
        Some(&r) => r,
        None => {
            let max_new = u32::try_from(quick.closed).unwrap_or(u32::MAX);
            let r = min_extra_bins(&key.1, remaining, quick.cap_max, max_new, EXTRA_BINPACK_NODES);
            if cache.len() < EXTRA_CACHE_LIMIT {
                cache.insert(key, r);
            }
            r
        }
    };
    match result {
        ExtraBins::Impossible => None,
        ExtraBins::Exact(n) => Some(Extra { count: quick.count.max(u64::from(n)), ..quick }),
        ExtraBins::Unknown => Some(quick),
    }
}

struct Search<'a> {
    m: &'a CostModel,
    ws: &'a [Workload],
    order: Vec<usize>,
    cpu_load: Vec<u32>,
    mem_load: Vec<u32>,
    cpu_open: usize,
    mem_open: usize,
    cpu_resid: u64,
    mem_resid: u64,
    rack_open: Vec<u32>,
    /// Racks of each identical-rack group, in index order.
    rack_groups: Vec<Vec<usize>>,
    suffix_min: Vec<f64>,
    rem_cpu: Vec<Vec<u32>>,
    rem_mem: Vec<Vec<u32>>,
    rem_cpu_sum: Vec<u64>,
    rem_mem_sum: Vec<u64>,
    root_cpu: u32,
    root_mem: u32,
    cpu_cache: ExtraCache,
    mem_cache: ExtraCache,
    cur: Vec<(usize, usize)>,
    best: f64,
    best_assign: Option<Vec<(usize, usize)>>,
    nodes: u64,
    limits: Limits,
    started: Instant,
    aborted: bool,
}

impl<'a> Search<'a> {
    fn new(m: &'a CostModel, ws: &'a [Workload], limits: Limits, started: Instant) -> Self {
        let order = canonical_order(ws);
        let n = ws.len();
        let mut suffix_min = vec![0.0; n + 1];
        for d in (0..n).rev() {
            let w = &ws[order[d]];
            let mut best = f64::INFINITY;
            for ci in 0..m.cpus.len() {
                if w.cpu_demand.0 > m.cpu_cap[ci] {
                    continue;
                }
                for mi in 0..m.mems.len() {
                    if w.mem_demand.0 <= m.mem_cap[mi] && m.allowed(ci, mi) {
                        best = best.min(m.assign_cost(w, ci, mi));
                    }
                }
            }
            suffix_min[d] = suffix_min[d + 1] + best;
        }
        let sorted_suffix = |f: &dyn Fn(&Workload) -> u32| -> (Vec<Vec<u32>>, Vec<u64>) {
            let mut lists = Vec::with_capacity(n + 1);
            let mut sums = Vec::with_capacity(n + 1);
            for d in 0..=n {
                let mut v: Vec<u32> = order[d..].iter().map(|&i| f(&ws[i])).collect();
                v.sort_unstable_by(|a, b| b.cmp(a));
                sums.push(v.iter().map(|&s| u64::from(s)).sum());
                lists.push(v);
            }
            (lists, sums)
        };
        let (rem_cpu, rem_cpu_sum) = sorted_suffix(&|w| w.cpu_demand.0);
        let (rem_mem, rem_mem_sum) = sorted_suffix(&|w| w.mem_demand.0);
        let cap_of = |caps: &[u32]| caps.iter().copied().max().unwrap_or(0);
        let root_cpu = if n == 0 { 0 } else { min_bins(&rem_cpu[0], cap_of(&m.cpu_cap), ROOT_BINPACK_NODES).bins };
        let root_mem = if n == 0 { 0 } else { min_bins(&rem_mem[0], cap_of(&m.mem_cap), ROOT_BINPACK_NODES).bins };

        let n_racks = m.rack_group.len();
        let mut rack_groups: Vec<Vec<usize>> = Vec::new();
        for (r, &g) in m.rack_group.iter().enumerate() {
            if g == rack_groups.len() {
                rack_groups.push(Vec::new());
            }
            rack_groups[g].push(r);
        }
        Search {
            m,
            ws,
            order,
            cpu_load: vec![0; m.cpus.len()],
            mem_load: vec![0; m.mems.len()],
            cpu_open: 0,
            mem_open: 0,
            cpu_resid: 0,
            mem_resid: 0,
            rack_open: vec![0; n_racks],
            rack_groups,
            suffix_min,
            rem_cpu,
            rem_mem,
            rem_cpu_sum,
            rem_mem_sum,
            root_cpu,
            root_mem,
            cpu_cache: HashMap::new(),
            mem_cache: HashMap::new(),
            cur: vec![(0, 0); n],
            best: f64::INFINITY,
            best_assign: None,
            nodes: 0,
            limits,
            started,
            aborted: false,
        }
    }

    /// Internal cost of a complete assignment indexed by workload position.
    fn cost_of(&self, assign: &[(usize, usize)]) -> f64 {
        let mut cpu_used = vec![false; self.m.cpus.len()];
        let mut mem_used = vec![false; self.m.mems.len()];
        let mut g = 0.0;
        for &i in &self.order {
            let (ci, mi) = assign[i];
            if !cpu_used[ci] {
                cpu_used[ci] = true;
                g += self.m.cpu_idle[ci];
            }
            if !mem_used[mi] {
                mem_used[mi] = true;
                g += self.m.mem_idle[mi];
            }
            g += self.m.assign_cost(&self.ws[i], ci, mi);
        }
        g
    }

    fn idle_bound(&mut self, depth: usize) -> Option<f64> {
        let m = self.m;
        let cpu = KindState {
            load: &self.cpu_load,
            cap: &m.cpu_cap,
            idle: &m.cpu_idle,
            resid_sum: self.cpu_resid,
            open: self.cpu_open,
        };
        let mem = KindState {
            load: &self.mem_load,
            cap: &m.mem_cap,
            idle: &m.mem_idle,
            resid_sum: self.mem_resid,
            open: self.mem_open,
        };
        // traditional memory opens together with its CPU, so both dimensions count servers
        let (cpu_root, mem_root) = if m.traditional {
            let r = self.root_cpu.max(self.root_mem);
            (r, r)
        } else {
            (self.root_cpu, self.root_mem)
        };
        let ec = extra_modules(&cpu, &self.rem_cpu[depth], self.rem_cpu_sum[depth], cpu_root)?;
        let em = extra_modules(&mem, &self.rem_mem[depth], self.rem_mem_sum[depth], mem_root)?;
        let ec = refine_extra(&mut self.cpu_cache, &cpu, depth, &self.rem_cpu[depth], ec)?;
        let em = refine_extra(&mut self.mem_cache, &mem, depth, &self.rem_mem[depth], em)?;
        if m.traditional {
            let extra = ec.count.max(em.count);
            if extra == 0 {
                return Some(0.0);
            }
            let min_server = (0..m.cpus.len())
                .filter(|&ci| self.cpu_load[ci] == 0)
                .filter_map(|ci| m.partner[ci].map(|mi| m.cpu_idle[ci] + m.mem_idle[mi]))
                .fold(f64::INFINITY, f64::min);
            Some(extra as f64 * min_server)
        } else {
            let part = |e: &Extra| if e.count == 0 { 0.0 } else { e.count as f64 * e.min_idle };
            Some(part(&ec) + part(&em))
        }
    }

    fn open_cpu(&mut self, ci: usize, d: u32) -> bool {
        let opened = self.cpu_load[ci] == 0;
        if opened {
            self.cpu_open += 1;
            self.cpu_resid += u64::from(self.m.cpu_cap[ci] - d);
            self.rack_open[self.m.cpu_rack[ci]] += 1;
        } else {
            self.cpu_resid -= u64::from(d);
        }
        self.cpu_load[ci] += d;
        opened
    }

    fn close_cpu(&mut self, ci: usize, d: u32) {
        self.cpu_load[ci] -= d;
        if self.cpu_load[ci] == 0 {
            self.cpu_open -= 1;
            self.cpu_resid -= u64::from(self.m.cpu_cap[ci] - d);
            self.rack_open[self.m.cpu_rack[ci]] -= 1;
        } else {
            self.cpu_resid += u64::from(d);
        }
    }

    fn open_mem(&mut self, mi: usize, d: u32) -> bool {
        let opened = self.mem_load[mi] == 0;
        if opened {
            self.mem_open += 1;
            self.mem_resid += u64::from(self.m.mem_cap[mi] - d);
            self.rack_open[self.m.mem_rack[mi]] += 1;
        } else {
            self.mem_resid -= u64::from(d);
        }
        self.mem_load[mi] += d;
        opened
    }

    fn close_mem(&mut self, mi: usize, d: u32) {
        self.mem_load[mi] -= d;
        if self.mem_load[mi] == 0 {
            self.mem_open -= 1;
            self.mem_resid -= u64::from(self.m.mem_cap[mi] - d);
            self.rack_open[self.m.mem_rack[mi]] -= 1;
        } else {
            self.mem_resid += u64::from(d);
        }
    }

    /// Whether touching `rack` now respects the identical-rack ordering.
    fn rack_ok(&self, rack: usize) -> bool {
        if !self.m.rack_symmetry || self.rack_open[rack] > 0 {
            return true;
        }
        let group = &self.rack_groups[self.m.rack_group[rack]];
        group.iter().find(|&&r| self.rack_open[r] == 0) == Some(&rack)
    }

    fn cpu_candidate(&self, ci: usize, d: u32) -> bool {
        let m = self.m;
        if self.cpu_load[ci] + d > m.cpu_cap[ci] {
            return false;
        }
        let class = &m.cpu_classes[m.cpu_class[ci]];
        if self.cpu_load[ci] == 0 {
            class.iter().find(|&&c| self.cpu_load[c] == 0) == Some(&ci) && self.rack_ok(m.cpu_rack[ci])
        } else {
            let load = self.cpu_load[ci];
            !class.iter().take_while(|&&c| c != ci).any(|&c| self.cpu_load[c] == load)
        }
    }

    fn mem_candidate(&self, mi: usize, md: u32) -> bool {
        let m = self.m;
        if self.mem_load[mi] + md > m.mem_cap[mi] {
            return false;
        }
        let class = &m.mem_classes[m.mem_class[mi]];
        if self.mem_load[mi] == 0 {
            class.iter().find(|&&c| self.mem_load[c] == 0) == Some(&mi) && self.rack_ok(m.mem_rack[mi])
        } else {
            let load = self.mem_load[mi];
            !class.iter().take_while(|&&c| c != mi).any(|&c| self.mem_load[c] == load)
        }
    }

    fn server_candidate(&self, ci: usize, d: u32, md: u32) -> Option<usize> {
        let m = self.m;
        let mi = m.partner[ci]?;
        if self.cpu_load[ci] + d > m.cpu_cap[ci] || self.mem_load[mi] + md > m.mem_cap[mi] {
            return None;
        }
        let class = &m.cpu_classes[m.cpu_class[ci]];
        let ok = if self.cpu_load[ci] == 0 {
            class.iter().find(|&&c| self.cpu_load[c] == 0) == Some(&ci)
        } else {
            let key = (self.cpu_load[ci], self.mem_load[mi]);
            !class
                .iter()
                .take_while(|&&c| c != ci)
                .any(|&c| m.partner[c].is_some_and(|p| (self.cpu_load[c], self.mem_load[p]) == key))
        };
        ok.then_some(mi)
    }

    /// Children of the node at `depth` as `(bound, ci, mi, cost_after)`.
    fn children(&mut self, depth: usize, g: f64) -> Vec<(f64, usize, usize, f64)> {
        let w = &self.ws[self.order[depth]];
        let (d, md) = (w.cpu_demand.0, w.mem_demand.0);
        let mut pairs = Vec::new();
        if self.m.traditional {
            for ci in 0..self.m.cpus.len() {
                if let Some(mi) = self.server_candidate(ci, d, md) {
                    pairs.push((ci, mi));
                }
            }
        } else {
            for ci in 0..self.m.cpus.len() {
                if !self.cpu_candidate(ci, d) {
                    continue;
                }
                self.open_cpu(ci, d);
                for mi in 0..self.m.mems.len() {
                    if self.m.allowed(ci, mi) && self.mem_candidate(mi, md) {
                        pairs.push((ci, mi));
                    }
                }
                self.close_cpu(ci, d);
            }
        }
        let mut out = Vec::with_capacity(pairs.len());
        for (ci, mi) in pairs {
            let opened_c = self.open_cpu(ci, d);
            let opened_m = self.open_mem(mi, md);
            let mut g2 = g;
            if opened_c {
                g2 += self.m.cpu_idle[ci];
            }
            if opened_m {
                g2 += self.m.mem_idle[mi];
            }
            g2 += self.m.assign_cost(w, ci, mi);
            if let Some(idle) = self.idle_bound(depth + 1) {
                out.push((g2 + self.suffix_min[depth + 1] + idle, ci, mi, g2));
            }
            self.close_mem(mi, md);
            self.close_cpu(ci, d);
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        out
    }

    fn over_budget(&mut self) -> bool {
        let out_of_time =
            self.nodes.is_multiple_of(TIME_CHECK_INTERVAL) && self.started.elapsed() >= self.limits.time_budget;
        if self.nodes >= self.limits.node_budget || out_of_time {
            self.aborted = true;
        }
        self.aborted
    }

    fn expand(&mut self, depth: usize, g: f64) {
        if self.over_budget() {
            return;
        }
        self.nodes += 1;
        if depth == self.order.len() {
            if g < self.best - tolerance(self.best) {
                self.best = g;
                let mut assign = vec![(0, 0); self.order.len()];
                for (d, &i) in self.order.iter().enumerate() {
                    assign[i] = self.cur[d];
                }
                self.best_assign = Some(assign);
            }
            return;
        }
        let w = &self.ws[self.order[depth]];
        let (d, md) = (w.cpu_demand.0, w.mem_demand.0);
        for (lb, ci, mi, g2) in self.children(depth, g) {
            if lb >= self.best - tolerance(self.best) {
                break;
            }
            self.open_cpu(ci, d);
            self.open_mem(mi, md);
            self.cur[depth] = (ci, mi);
            self.expand(depth + 1, g2);
            self.close_mem(mi, md);
            self.close_cpu(ci, d);
            if self.aborted {
                return;
            }
        }
    }
}

/// Relabels interchangeable racks and modules in order of first use by workload id, so
/// equivalent optima map to one representative.
fn canonicalize(m: &CostModel, ws: &[Workload], assign: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut by_id: Vec<usize> = (0..ws.len()).collect();
    by_id.sort_by_key(|&i| ws[i].id);
    let mut assign = assign.to_vec();

    if m.rack_symmetry {
        let n_racks = m.rack_group.len();
        let rack_cpus: Vec<Vec<usize>> =
            (0..n_racks).map(|r| (0..m.cpus.len()).filter(|&c| m.cpu_rack[c] == r).collect()).collect();
        let rack_mems: Vec<Vec<usize>> =
            (0..n_racks).map(|r| (0..m.mems.len()).filter(|&x| m.mem_rack[x] == r).collect()).collect();
        let mut map: Vec<Option<usize>> = vec![None; n_racks];
        let mut taken = vec![false; n_racks];
        let mut touch = |r: usize, map: &mut Vec<Option<usize>>| {
            if map[r].is_none() {
                let target = (0..n_racks)
                    .find(|&t| m.rack_group[t] == m.rack_group[r] && !taken[t])
                    .expect("group has a free rack");
                taken[target] = true;
                map[r] = Some(target);
            }
        };
        for &i in &by_id {
            let (ci, mi) = assign[i];
            touch(m.cpu_rack[ci], &mut map);
            touch(m.mem_rack[mi], &mut map);
        }
        for a in &mut assign {
            let (rc, rm) = (m.cpu_rack[a.0], m.mem_rack[a.1]);
            let kc = rack_cpus[rc].iter().position(|&c| c == a.0).expect("cpu in its rack");
            let km = rack_mems[rm].iter().position(|&x| x == a.1).expect("mem in its rack");
            *a = (rack_cpus[map[rc].expect("touched")][kc], rack_mems[map[rm].expect("touched")][km]);
        }
    }

    let mut cpu_map: Vec<Option<usize>> = vec![None; m.cpus.len()];
    let mut cpu_next = vec![0usize; m.cpu_classes.len()];
    let mut mem_map: Vec<Option<usize>> = vec![None; m.mems.len()];
    let mut mem_next = vec![0usize; m.mem_classes.len()];
    for &i in &by_id {
        let (ci, mi) = assign[i];
        if cpu_map[ci].is_none() {
            let c = m.cpu_class[ci];
            cpu_map[ci] = Some(m.cpu_classes[c][cpu_next[c]]);
            cpu_next[c] += 1;
        }
        if !m.traditional && mem_map[mi].is_none() {
            let c = m.mem_class[mi];
            mem_map[mi] = Some(m.mem_classes[c][mem_next[c]]);
            mem_next[c] += 1;
        }
    }
    assign
        .iter()
        .map(|&(ci, mi)| {
            let nc = cpu_map[ci].expect("used cpu");
            if m.traditional {
                (nc, m.partner[nc].expect("server has a memory module"))
            } else {
                (nc, mem_map[mi].expect("used mem"))
            }
        })
        .collect()
}

/// Minimum-power placement by branch-and-bound.
///
/// The greedy placement seeds the incumbent. When the search finishes within `limits` the
/// result is proven optimal; otherwise the incumbent is returned with `proven_optimal` unset.
pub fn solve_exact(instance: &MilpInstance, limits: Limits) -> Result<SolveResult, SolveError> {
    let started = Instant::now();
    instance.validate()?;
    let model = CostModel::new(instance)?;
    let ws = &instance.workloads;
    let mut search = Search::new(&model, ws, limits, started);

    if let Ok(seed) = greedy_assignment(instance, &model) {
        search.best = search.cost_of(&seed);
        search.best_assign = Some(seed);
    }
    let root = search.idle_bound(0).map(|idle| search.suffix_min[0] + idle);
    match root {
        None => {
            search.best_assign = None;
        }
        Some(lb) if lb >= search.best - tolerance(search.best) => {
            search.nodes = 1;
        }
        Some(_) => search.expand(0, 0.0),
    }

    let proven = !search.aborted;
    let nodes = search.nodes;
    let Some(best) = search.best_assign else {
        return Err(if proven { SolveError::Infeasible } else { SolveError::BudgetExhausted });
    };
    let canon = canonicalize(&model, ws, &best);
    let placement: Placement = canon
        .iter()
        .zip(ws)
        .map(|(&(ci, mi), w)| Assignment { workload: w.id, cpu: model.cpus[ci], mem: model.mems[mi] })
        .collect();
    finish(instance, placement, proven, nodes, started)
}
