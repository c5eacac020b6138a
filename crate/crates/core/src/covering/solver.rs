//! Set-cover and independent-set solvers on index sets.
//!
//! Exact solvers work on `u128` masks (at most 128 elements or vertices) and
//! take positive linear weights. Greedy solvers use [`BitSet`] and scale to
//! arbitrary sizes.

use crate::par;

const REL_EPS: f64 = 1e-12;

/// Fixed-capacity bit set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitSet {
    words: Vec<u64>,
    len: usize,
}

impl BitSet {
    pub fn new(len: usize) -> Self {
        BitSet { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn full(len: usize) -> Self {
        let mut s = BitSet::new(len);
        for i in 0..len {
            s.insert(i);
        }
        s
    }

    pub fn capacity(&self) -> usize {
        self.len
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersection_count(&self, other: &BitSet) -> usize {
        self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones() as usize).sum()
    }

    pub fn intersects(&self, other: &BitSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn difference_with(&mut self, other: &BitSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn union_with(&mut self, other: &BitSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn is_subset(&self, other: &BitSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.contains(i))
    }

    /// Low 128 bits, for sets known to fit.
    pub fn to_u128(&self) -> u128 {
        let lo = self.words.first().copied().unwrap_or(0) as u128;
        let hi = self.words.get(1).copied().unwrap_or(0) as u128;
        lo | hi << 64
    }
}

fn bits(mut m: u128) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(i)
        }
    })
}

/// Minimum-weight cover of `universe` by `masks`; `None` when the union of
/// the masks misses part of the universe. Among optimal covers the first one
/// found in the deterministic search order is returned.
pub fn exact_min_cover(universe: u128, masks: &[u128], weights: &[f64]) -> Option<(Vec<usize>, f64)> {
    let union = masks.iter().fold(0u128, |a, m| a | m);
    if union & universe != universe {
        return None;
    }
    // drop candidates dominated by a cheaper-or-equal superset
    let keep: Vec<usize> = (0..masks.len())
        .filter(|&i| {
            let mi = masks[i] & universe;
            mi != 0
                && !(0..masks.len()).any(|j| {
                    let mj = masks[j] & universe;
                    j != i
                        && mi & !mj == 0
                        && (weights[j] < weights[i] || (weights[j] == weights[i] && (mj != mi || j < i)))
                })
        })
        .collect();
    let cand_masks: Vec<u128> = keep.iter().map(|&i| masks[i] & universe).collect();
    let cand_w: Vec<f64> = keep.iter().map(|&i| weights[i]).collect();

    let greedy = greedy_cover_small(universe, &cand_masks, &cand_w);
    let mut search = CoverSearch {
        masks: &cand_masks,
        w: &cand_w,
        best: greedy.iter().map(|&i| cand_w[i]).sum(),
        best_set: greedy,
        chosen: Vec::new(),
        forbidden: vec![false; cand_masks.len()],
    };
    search.recurse(universe, 0.0);
    let mut sol: Vec<usize> = search.best_set.iter().map(|&i| keep[i]).collect();
    sol.sort_unstable();
    let total = sol.iter().map(|&i| weights[i]).sum();
    Some((sol, total))
}

fn greedy_cover_small(universe: u128, masks: &[u128], w: &[f64]) -> Vec<usize> {
    let mut uncovered = universe;
    let mut out = Vec::new();
    while uncovered != 0 {
        let mut best: Option<(usize, f64)> = None;
        for (i, m) in masks.iter().enumerate() {
            let gain = (m & uncovered).count_ones();
            if gain == 0 {
                continue;
            }
            let ratio = w[i] / gain as f64;
            if best.is_none_or(|(_, r)| ratio < r) {
                best = Some((i, ratio));
            }
        }
        let (i, _) = best.expect("universe coverable");
        uncovered &= !masks[i];
        out.push(i);
    }
    out
}

struct CoverSearch<'a> {
    masks: &'a [u128],
    w: &'a [f64],
    best: f64,
    best_set: Vec<usize>,
    chosen: Vec<usize>,
    forbidden: Vec<bool>,
}

impl CoverSearch<'_> {
    fn recurse(&mut self, uncovered: u128, cost: f64) {
        if uncovered == 0 {
            if cost < self.best * (1.0 - REL_EPS) {
                self.best = cost;
                self.best_set = self.chosen.clone();
            }
            return;
        }
        // every uncovered element needs some allowed candidate
        let mut pivot = None;
        let mut pivot_count = usize::MAX;
        let mut lb_elem: f64 = 0.0;
        for e in bits(uncovered) {
            let mut count = 0;
            let mut cheapest = f64::INFINITY;
            for (c, m) in self.masks.iter().enumerate() {
                if !self.forbidden[c] && m >> e & 1 == 1 {
                    count += 1;
                    cheapest = cheapest.min(self.w[c]);
                }
            }
            if count == 0 {
                return;
            }
            lb_elem = lb_elem.max(cheapest);
            if count < pivot_count {
                pivot_count = count;
                pivot = Some(e);
            }
        }
        if cost + lb_elem >= self.best * (1.0 - REL_EPS) {
            return;
        }
        let e = pivot.unwrap();
        let mut options: Vec<usize> = (0..self.masks.len())
            .filter(|&c| !self.forbidden[c] && self.masks[c] >> e & 1 == 1)
            .collect();
        options.sort_by(|&a, &b| {
            let ra = self.w[a] / (self.masks[a] & uncovered).count_ones() as f64;
            let rb = self.w[b] / (self.masks[b] & uncovered).count_ones() as f64;
            ra.total_cmp(&rb).then(a.cmp(&b))
        });
        let mut banned = Vec::new();
        for c in options {
            self.chosen.push(c);
            self.recurse(uncovered & !self.masks[c], cost + self.w[c]);
            self.chosen.pop();
            self.forbidden[c] = true;
            banned.push(c);
        }
        for c in banned {
            self.forbidden[c] = false;
        }
    }
}

/// Maximum-weight independent set of the graph with adjacency masks `adj`
/// (irreflexive, symmetric). Returns the selected vertices in increasing order.
pub fn exact_max_independent(adj: &[u128], weights: &[f64]) -> (Vec<usize>, f64) {
    let n = adj.len();
    assert!(n <= 128, "exact independent set limited to 128 vertices");
    let all: u128 = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
    let order = weight_order(weights);
    let greedy = greedy_independent_small(adj, &order);
    let mut search = MisSearch {
        adj,
        w: weights,
        best: greedy.iter().map(|&i| weights[i]).sum(),
        best_set: greedy,
        chosen: Vec::new(),
    };
    search.recurse(all, 0.0);
    let mut sol = search.best_set;
    sol.sort_unstable();
    let total = sol.iter().map(|&i| weights[i]).sum();
    (sol, total)
}

/// Indices sorted by decreasing weight, ties by index.
fn weight_order(w: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    order
}

fn greedy_independent_small(adj: &[u128], order: &[usize]) -> Vec<usize> {
    let mut blocked = 0u128;
    let mut out = Vec::new();
    for &v in order {
        if blocked >> v & 1 == 0 {
            out.push(v);
            blocked |= adj[v] | 1 << v;
        }
    }
    out
}

struct MisSearch<'a> {
    adj: &'a [u128],
    w: &'a [f64],
    best: f64,
    best_set: Vec<usize>,
    chosen: Vec<usize>,
}

impl MisSearch<'_> {
    /// Greedy clique cover of `p`; an independent set meets each clique at
    /// most once, so the sum of clique maxima bounds it.
    fn clique_bound(&self, p: u128) -> f64 {
        let mut verts: Vec<usize> = bits(p).collect();
        verts.sort_by(|&a, &b| self.w[b].total_cmp(&self.w[a]).then(a.cmp(&b)));
        let mut cliques: Vec<u128> = Vec::new();
        let mut bound = 0.0;
        for v in verts {
            match cliques.iter_mut().find(|c| **c & !self.adj[v] == 0) {
                Some(c) => *c |= 1 << v,
                None => {
                    cliques.push(1 << v);
                    bound += self.w[v];
                }
            }
        }
        bound
    }

    fn recurse(&mut self, p: u128, cur: f64) {
        if p == 0 {
            if cur > self.best * (1.0 + REL_EPS) {
                self.best = cur;
                self.best_set = self.chosen.clone();
            }
            return;
        }
        if cur + self.clique_bound(p) <= self.best * (1.0 + REL_EPS) {
            return;
        }
        let v = bits(p)
            .max_by(|&a, &b| self.w[a].total_cmp(&self.w[b]).then(b.cmp(&a)))
            .unwrap();
        self.chosen.push(v);
        self.recurse(p & !self.adj[v] & !(1 << v), cur + self.w[v]);
        self.chosen.pop();
        self.recurse(p & !(1 << v), cur);
    }
}

/// Greedy cover by best weight per newly covered element; ties go to the
/// lowest index. Returns `None` if the universe is not coverable.
pub fn greedy_cover(universe: &BitSet, masks: &[BitSet], weights: &[f64]) -> Option<Vec<usize>> {
    let mut uncovered = universe.clone();
    let mut out = Vec::new();
    while !uncovered.is_empty() {
        let ratios = par::map_range(0..masks.len(), |i| {
            let gain = masks[i].intersection_count(&uncovered);
            if gain == 0 {
                f64::INFINITY
            } else {
                weights[i] / gain as f64
            }
        });
        let (best, r) = ratios
            .iter()
            .enumerate()
            .fold((usize::MAX, f64::INFINITY), |acc, (i, &r)| if r < acc.1 { (i, r) } else { acc });
        if !r.is_finite() {
            return None;
        }
        uncovered.difference_with(&masks[best]);
        out.push(best);
    }
    out.sort_unstable();
    Some(out)
}

/// Maximal independent set scanning vertices in `order`.
pub fn greedy_independent(conflicts: &[BitSet], order: &[usize]) -> Vec<usize> {
    let mut blocked = BitSet::new(conflicts.len());
    let mut out = Vec::new();
    for &v in order {
        if !blocked.contains(v) {
            out.push(v);
            blocked.union_with(&conflicts[v]);
            blocked.insert(v);
        }
    }
    out.sort_unstable();
    out
}

pub fn descending_weight_order(weights: &[f64]) -> Vec<usize> {
    weight_order(weights)
}
