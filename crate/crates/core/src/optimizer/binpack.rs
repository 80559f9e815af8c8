//! One-dimensional bin-packing bounds used to bound the number of active modules.

/// Lower bound on bins, or the optimum when `exact` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinCount {
    pub bins: u32,
    pub exact: bool,
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Martello-Toth L2 lower bound on the number of bins of capacity `cap`.
pub fn l2_lower_bound(sizes: &[u32], cap: u32) -> u32 {
    if sizes.is_empty() {
        return 0;
    }
    let cap64 = u64::from(cap);
    let total: u64 = sizes.iter().map(|&s| u64::from(s)).sum();
    let mut best = ceil_div(total, cap64);

    let mut alphas: Vec<u32> = sizes.iter().copied().filter(|&s| 2 * u64::from(s) <= cap64).collect();
    alphas.push(0);
    alphas.sort_unstable();
    alphas.dedup();

    for alpha in alphas {
        let (mut n1, mut n2, mut sum2, mut sum3) = (0u64, 0u64, 0u64, 0u64);
        for &s in sizes {
            let s64 = u64::from(s);
            if s > cap - alpha {
                n1 += 1;
            } else if 2 * s64 > cap64 {
                n2 += 1;
                sum2 += s64;
            } else if s >= alpha {
                sum3 += s64;
            }
        }
        let free_in_j2 = n2 * cap64 - sum2;
        let extra = if sum3 > free_in_j2 { ceil_div(sum3 - free_in_j2, cap64) } else { 0 };
        best = best.max(n1 + n2 + extra);
    }
    best as u32
}

fn first_fit_decreasing(sorted_desc: &[u32], cap: u32) -> u32 {
    let mut resid: Vec<u32> = Vec::new();
    for &s in sorted_desc {
        match resid.iter_mut().find(|r| **r >= s) {
            Some(r) => *r -= s,
            None => resid.push(cap - s),
        }
    }
    resid.len() as u32
}

struct Dfs<'a> {
    items: &'a [u32],
    suffix: Vec<u64>,
    cap: u32,
    best: u32,
    nodes: u64,
    node_limit: u64,
    resid: Vec<u32>,
}

impl Dfs<'_> {
    fn run(&mut self, i: usize) -> bool {
        self.nodes += 1;
        if self.nodes > self.node_limit {
            return false;
        }
        if i == self.items.len() {
            self.best = self.best.min(self.resid.len() as u32);
            return true;
        }
        let free: u64 = self.resid.iter().map(|&r| u64::from(r)).sum();
        let need = self.suffix[i].saturating_sub(free);
        let lb = self.resid.len() as u64 + ceil_div(need, u64::from(self.cap));
        if lb >= u64::from(self.best) {
            return true;
        }
        let s = self.items[i];
        let mut tried: Vec<u32> = Vec::new();
        for b in 0..self.resid.len() {
            let r = self.resid[b];
            if r >= s && !tried.contains(&r) {
                tried.push(r);
                self.resid[b] -= s;
                let ok = self.run(i + 1);
                self.resid[b] += s;
                if !ok {
                    return false;
                }
            }
        }
        if (self.resid.len() as u32) + 1 < self.best {
            self.resid.push(self.cap - s);
            let ok = self.run(i + 1);
            self.resid.pop();
            if !ok {
                return false;
            }
        }
        true
    }
}

/// Minimum number of bins of capacity `cap` holding `sizes`.
///
/// Exact when the search finishes within `node_limit` nodes, otherwise the L2 bound.
pub fn min_bins(sizes: &[u32], cap: u32, node_limit: u64) -> BinCount {
    if sizes.is_empty() {
        return BinCount { bins: 0, exact: true };
    }
    assert!(sizes.iter().all(|&s| s <= cap), "item larger than bin capacity");
    let mut items = sizes.to_vec();
    items.sort_unstable_by(|a, b| b.cmp(a));
    let lb = l2_lower_bound(&items, cap);
    let ub = first_fit_decreasing(&items, cap);
    if lb == ub {
        return BinCount { bins: ub, exact: true };
    }
    let mut suffix = vec![0u64; items.len() + 1];
    for i in (0..items.len()).rev() {
        suffix[i] = suffix[i + 1] + u64::from(items[i]);
    }
    let mut dfs = Dfs { items: &items, suffix, cap, best: ub, nodes: 0, node_limit, resid: Vec::new() };
    if dfs.run(0) {
        BinCount { bins: dfs.best, exact: true }
    } else {
        BinCount { bins: lb, exact: false }
    }
}

/// Outcome of [`min_extra_bins`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ExtraBins {
    Exact(u32),
    /// More than the allowed number of new bins would be needed.
    Impossible,
    /// The node limit was hit first.
    Unknown,
}

struct ExtraDfs<'a> {
    items: &'a [u32],
    suffix: Vec<u64>,
    cap: u32,
    resid: Vec<u32>,
    new_bins: u32,
    best: u32,
    nodes: u64,
    node_limit: u64,
}

impl ExtraDfs<'_> {
    fn run(&mut self, i: usize) -> bool {
        self.nodes += 1;
        if self.nodes > self.node_limit {
            return false;
        }
        if i == self.items.len() {
            self.best = self.best.min(self.new_bins);
            return true;
        }
        let free: u64 = self.resid.iter().map(|&r| u64::from(r)).sum();
        let need = self.suffix[i].saturating_sub(free);
        let lb = u64::from(self.new_bins) + ceil_div(need, u64::from(self.cap));
        if lb >= u64::from(self.best) {
            return true;
        }
        let s = self.items[i];
        let mut tried: Vec<u32> = Vec::new();
        for b in 0..self.resid.len() {
            let r = self.resid[b];
            if r >= s && !tried.contains(&r) {
                tried.push(r);
                self.resid[b] -= s;
                let ok = self.run(i + 1);
                self.resid[b] += s;
                if !ok {
                    return false;
                }
            }
        }
        if self.new_bins + 1 < self.best && s <= self.cap {
            self.resid.push(self.cap - s);
            self.new_bins += 1;
            let ok = self.run(i + 1);
            self.new_bins -= 1;
            self.resid.pop();
            if !ok {
                return false;
            }
        }
        true
    }
}

/// Fewest new bins of capacity `cap` that, together with partly filled bins of residual
/// capacity `resid`, hold `items_desc` (sorted descending). At most `max_new` new bins may be used.
pub(crate) fn min_extra_bins(resid: &[u32], items_desc: &[u32], cap: u32, max_new: u32, node_limit: u64) -> ExtraBins {
    let mut suffix = vec![0u64; items_desc.len() + 1];
    for i in (0..items_desc.len()).rev() {
        suffix[i] = suffix[i + 1] + u64::from(items_desc[i]);
    }
    let mut dfs = ExtraDfs {
        items: items_desc,
        suffix,
        cap,
        resid: resid.to_vec(),
        new_bins: 0,
        best: max_new.saturating_add(1),
        nodes: 0,
        node_limit,
    };
    if !dfs.run(0) {
        return ExtraBins::Unknown;
    }
    if dfs.best > max_new {
        ExtraBins::Impossible
    } else {
        ExtraBins::Exact(dfs.best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_min_bins(sizes: &[u32], cap: u32) -> u32 {
        // try every assignment of items to bins labelled 0..n
        fn rec(i: usize, sizes: &[u32], cap: u32, loads: &mut Vec<u32>, best: &mut u32) {
            if loads.len() as u32 >= *best {
                return;
            }
            if i == sizes.len() {
                *best = loads.len() as u32;
                return;
            }
            for b in 0..loads.len() {
                if loads[b] + sizes[i] <= cap {
                    loads[b] += sizes[i];
                    rec(i + 1, sizes, cap, loads, best);
                    loads[b] -= sizes[i];
                }
            }
            loads.push(sizes[i]);
            rec(i + 1, sizes, cap, loads, best);
            loads.pop();
        }
        let mut best = sizes.len() as u32 + 1;
        rec(0, sizes, cap, &mut Vec::new(), &mut best);
        best.min(sizes.len() as u32)
    }

    #[test]
    fn extra_bins_with_open_residuals() {
        // a 19 fits in neither residual, the 10 does
        assert_eq!(min_extra_bins(&[12, 5], &[19, 10], 36, 5, 1000), ExtraBins::Exact(1));
        assert_eq!(min_extra_bins(&[], &[19, 19, 19], 36, 2, 1000), ExtraBins::Impossible);
        assert_eq!(min_extra_bins(&[36], &[18, 18], 36, 0, 1000), ExtraBins::Exact(0));
        assert_eq!(min_extra_bins(&[], &[17, 16, 10, 10, 10, 9], 36, 9, 1000), ExtraBins::Exact(2));
        assert_eq!(min_extra_bins(&[], &[17, 16, 10, 10, 10, 9], 36, 9, 1), ExtraBins::Unknown);
    }

    #[test]
    fn extra_bins_match_brute_force_from_empty() {
        let mut state = crate::wlgen::GeneratorState(7);
        for _ in 0..100 {
            let mut items = Vec::new();
            for _ in 0..7 {
                let (s, v) = crate::wlgen::sample_uniform_fixed(state, 5, 30, 1).unwrap();
                state = s;
                items.push(v);
            }
            items.sort_unstable_by(|a, b| b.cmp(a));
            assert_eq!(min_extra_bins(&[], &items, 36, 7, 1_000_000), ExtraBins::Exact(brute_min_bins(&items, 36)));
        }
    }

    #[test]
    fn ffd_example() {
        let items = [19, 19, 18, 18];
        assert_eq!(min_bins(&items, 36, 1000), BinCount { bins: 3, exact: true });
        assert_eq!(brute_min_bins(&items, 36), 3);
    }

    #[test]
    fn l2_sees_big_items() {
        // three items above half capacity cannot share
        assert_eq!(l2_lower_bound(&[19, 19, 19], 36), 3);
        assert_eq!(l2_lower_bound(&[], 36), 0);
    }

    #[test]
    fn matches_brute_force_on_small_sets() {
        let mut state = crate::wlgen::GeneratorState(99);
        for _ in 0..200 {
            let mut items = Vec::new();
            for _ in 0..8 {
                let (s, v) = crate::wlgen::sample_uniform_fixed(state, 5, 30, 1).unwrap();
                state = s;
                items.push(v);
            }
            let exact = brute_min_bins(&items, 36);
            let got = min_bins(&items, 36, 1_000_000);
            assert!(got.exact);
            assert_eq!(got.bins, exact, "{items:?}");
            assert!(l2_lower_bound(&items, 36) <= exact);
        }
    }
}
