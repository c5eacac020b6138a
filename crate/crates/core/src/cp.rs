//! Finite Carathéodory–Pesin sums over variable-length Bowen balls: the
//! cover sum `M^s_{N,ε}`, the packing sum `P^s_{N,ε}` and critical
//! exponents located by bisection on `s`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::bowen::{checked_cut, window_distance_unchecked};
use crate::covering::solver::{self, BitSet};
use crate::covering::{linear_weights, log_sum_exp, BoundType, CountBound, KernelConfig, Method, Mode, MASK_CAPACITY};
use crate::error::{Error, Result};
use crate::par;
use crate::rational::{to_f64, Q};
use crate::systems::{Point, Potential, SampleCloud, SystemSpec};

/// Ratio of consecutive sums at or below which a probe counts as vanishing.
pub const THETA_VANISH: f64 = 0.5;
/// Ratio of consecutive sums at or above which a probe counts as exploding.
pub const THETA_EXPLODE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CpKind {
    Bowen,
    Packing,
}

impl CpKind {
    pub fn name(&self) -> &'static str {
        match self {
            CpKind::Bowen => "bowen",
            CpKind::Packing => "packing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyEntry {
    pub center: usize,
    pub n: usize,
    pub log_cost: f64,
}

/// Chosen balls of a cover or packing, with centers as cloud indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverFamily {
    pub kind: CpKind,
    pub entries: Vec<FamilyEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpSum {
    pub bound: CountBound,
    pub family: CoverFamily,
}

/// Candidate balls `(x, n)` with `x` in the cloud and `n ∈ [n_lo, n_hi]`.
struct Candidates<'a> {
    sys: &'a SystemSpec,
    points: &'a [Point],
    kind: CpKind,
    items: Vec<(usize, usize)>,
    /// `ln(1/ε) · S_n f(x)` per candidate.
    potential: Vec<f64>,
    /// Open-ball members (cover) or closed-ball members (packing) in the cloud.
    members: Vec<BitSet>,
    eps: Q,
}

impl<'a> Candidates<'a> {
    #[allow(clippy::too_many_arguments)]
    fn build(
        sys: &'a SystemSpec,
        points: &'a [Point],
        kind: CpKind,
        n_lo: usize,
        n_hi: usize,
        eps: &Q,
        f: &Potential,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConfig("CP sums need a nonempty cloud".into()));
        }
        if n_lo == 0 || n_lo > n_hi {
            return Err(Error::InvalidConfig(format!("length range [{n_lo}, {n_hi}] is empty or starts at 0")));
        }
        f.validate(sys)?;
        points.iter().try_for_each(|p| sys.validate_point(p))?;
        let cut = checked_cut(sys, n_hi, eps)?;
        let scale = -to_f64(eps).ln();
        let items: Vec<(usize, usize)> =
            (0..points.len()).flat_map(|i| (n_lo..=n_hi).map(move |n| (i, n))).collect();
        let rows = par::try_map(&items, |&(i, n)| {
            let mut m = BitSet::new(points.len());
            for (j, z) in points.iter().enumerate() {
                let d = window_distance_unchecked(sys, &points[i], z, 0, n - 1);
                let inside = match kind {
                    CpKind::Bowen => cut.open(d),
                    CpKind::Packing => cut.closed(d),
                };
                if inside {
                    m.insert(j);
                }
            }
            let w = if f.is_zero() { 0.0 } else { f.birkhoff_sum(sys, &points[i], n)? * scale };
            Ok::<_, Error>((m, w))
        })?;
        let (members, potential) = rows.into_iter().unzip();
        Ok(Candidates { sys, points, kind, items, potential, members, eps: *eps })
    }

    fn log_costs(&self, s: f64) -> Vec<f64> {
        self.items.iter().zip(&self.potential).map(|(&(_, n), w)| -(n as f64) * s + w).collect()
    }

    fn family(&self, chosen: &[usize], logs: &[f64]) -> CoverFamily {
        let entries = chosen
            .iter()
            .map(|&c| FamilyEntry { center: self.items[c].0, n: self.items[c].1, log_cost: logs[c] })
            .collect();
        CoverFamily { kind: self.kind, entries }
    }

    fn cover(&self, s: f64, mode: Mode, cfg: &KernelConfig) -> Result<CpSum> {
        let logs = self.log_costs(s);
        let (w, _) = linear_weights(&logs);
        let len = self.points.len();
        let chosen = match mode {
            Mode::Exact => {
                if len > cfg.exact_limit.min(MASK_CAPACITY) {
                    return Err(Error::InstanceTooLarge { size: len, limit: cfg.exact_limit.min(MASK_CAPACITY) });
                }
                let masks: Vec<u128> = self.members.iter().map(BitSet::to_u128).collect();
                solver::exact_min_cover(BitSet::full(len).to_u128(), &masks, &w).map(|r| r.0)
            }
            Mode::Greedy => solver::greedy_cover(&BitSet::full(len), &self.members, &w),
        }
        .ok_or_else(|| Error::InvariantViolation("every point lies in its own ball".into()))?;
        let cut = self.sys.cut(&self.eps);
        let covered = par::map(self.points, |z| {
            chosen.iter().any(|&c| {
                let (i, n) = self.items[c];
                cut.open(window_distance_unchecked(self.sys, &self.points[i], z, 0, n - 1))
            })
        });
        if covered.contains(&false) {
            return Err(Error::InvariantViolation("Bowen cover failed re-verification".into()));
        }
        let (bound_type, method) = match mode {
            Mode::Exact => (BoundType::Exact, Method::BruteForce),
            Mode::Greedy => (BoundType::Upper, Method::Greedy),
        };
        let bound = CountBound {
            log_value: log_sum_exp(&chosen.iter().map(|&c| logs[c]).collect::<Vec<_>>()),
            bound_type,
            method,
            witness: Some(chosen.iter().map(|&c| self.points[self.items[c].0].clone()).collect()),
            caveats: vec!["centers restricted to the cloud".into()],
        };
        Ok(CpSum { bound, family: self.family(&chosen, &logs) })
    }

    fn pack(&self, s: f64, mode: Mode, cfg: &KernelConfig) -> Result<CpSum> {
        let logs = self.log_costs(s);
        let (w, _) = linear_weights(&logs);
        let k = self.items.len();
        let conflicts: Vec<BitSet> = par::map_range(0..k, |a| {
            let mut m = BitSet::new(k);
            for b in 0..k {
                if a != b && self.members[a].intersects(&self.members[b]) {
                    m.insert(b);
                }
            }
            m
        });
        let chosen = match mode {
            Mode::Exact => {
                let limit = cfg.exact_limit.min(MASK_CAPACITY);
                if self.points.len() > limit {
                    return Err(Error::InstanceTooLarge { size: self.points.len(), limit });
                }
                if k > MASK_CAPACITY {
                    return Err(Error::InstanceTooLarge { size: k, limit: MASK_CAPACITY });
                }
                let adj: Vec<u128> = conflicts.iter().map(BitSet::to_u128).collect();
                solver::exact_max_independent(&adj, &w).0
            }
            Mode::Greedy => solver::greedy_independent(&conflicts, &solver::descending_weight_order(&w)),
        };
        let cut = self.sys.cut(&self.eps);
        for (a, &ca) in chosen.iter().enumerate() {
            for &cb in &chosen[a + 1..] {
                let (i, n) = self.items[ca];
                let (j, m) = self.items[cb];
                let shared = self.points.iter().any(|z| {
                    cut.closed(window_distance_unchecked(self.sys, &self.points[i], z, 0, n - 1))
                        && cut.closed(window_distance_unchecked(self.sys, &self.points[j], z, 0, m - 1))
                });
                if shared {
                    return Err(Error::InvariantViolation("packing failed re-verification".into()));
                }
            }
        }
        let (bound_type, method) = match mode {
            Mode::Exact => (BoundType::Exact, Method::BruteForce),
            Mode::Greedy => (BoundType::Lower, Method::Greedy),
        };
        let bound = CountBound {
            log_value: log_sum_exp(&chosen.iter().map(|&c| logs[c]).collect::<Vec<_>>()),
            bound_type,
            method,
            witness: Some(chosen.iter().map(|&c| self.points[self.items[c].0].clone()).collect()),
            caveats: vec!["disjointness decided on the cloud".into()],
        };
        Ok(CpSum { bound, family: self.family(&chosen, &logs) })
    }

    fn solve(&self, s: f64, mode: Mode, cfg: &KernelConfig) -> Result<CpSum> {
        match self.kind {
            CpKind::Bowen => self.cover(s, mode, cfg),
            CpKind::Packing => self.pack(s, mode, cfg),
        }
    }
}

/// `M^s_{N,ε}`: cheapest cover of the cloud by open balls `B_n(x, ε)` with
/// `x` in the cloud, `N ≤ n ≤ N_max`, at cost `e^{-ns + ln(1/ε) S_n f(x)}`.
#[allow(clippy::too_many_arguments)]
pub fn bowen_cover_sum(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    s: f64,
    n: usize,
    n_max: usize,
    eps: &Q,
    f: &Potential,
    mode: Mode,
    cfg: &KernelConfig,
) -> Result<CpSum> {
    Candidates::build(sys, &cloud.points, CpKind::Bowen, n, n_max, eps, f)?.cover(s, mode, cfg)
}

/// `P^s_{N,ε}`: heaviest family of closed balls `B̄_n(x, ε)`, `x` in the
/// cloud, pairwise disjoint on the cloud.
#[allow(clippy::too_many_arguments)]
pub fn packing_sum(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    s: f64,
    n: usize,
    n_max: usize,
    eps: &Q,
    f: &Potential,
    mode: Mode,
    cfg: &KernelConfig,
) -> Result<CpSum> {
    Candidates::build(sys, &cloud.points, CpKind::Packing, n, n_max, eps, f)?.pack(s, mode, cfg)
}

/// Sum of packing sums over the parts of a partition of the cloud (given as
/// index lists).
#[allow(clippy::too_many_arguments)]
pub fn packing_decomposed_sum(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    partition: &[Vec<usize>],
    s: f64,
    n: usize,
    n_max: usize,
    eps: &Q,
    f: &Potential,
    mode: Mode,
    cfg: &KernelConfig,
) -> Result<CountBound> {
    let mut seen = vec![false; cloud.len()];
    for &i in partition.iter().flatten() {
        if i >= cloud.len() {
            return Err(Error::PartitionIncomplete(format!("index {i} outside the cloud")));
        }
        seen[i] = true;
    }
    if let Some(i) = seen.iter().position(|b| !b) {
        return Err(Error::PartitionIncomplete(format!("point {i} is in no part")));
    }
    let mut logs = Vec::new();
    let mut bound_type = BoundType::Exact;
    for part in partition.iter().filter(|p| !p.is_empty()) {
        let sub = cloud.select(part, "part");
        let b = packing_sum(sys, &sub, s, n, n_max, eps, f, mode, cfg)?.bound;
        bound_type = b.bound_type;
        logs.push(b.log_value);
    }
    Ok(CountBound {
        log_value: log_sum_exp(&logs),
        bound_type,
        method: if mode == Mode::Exact { Method::BruteForce } else { Method::Greedy },
        witness: None,
        caveats: vec!["disjointness decided on the cloud".into(), "finite partition supplied by caller".into()],
    })
}

/// Smallest decomposed packing sum over the supplied partitions and the
/// trivial one.
#[allow(clippy::too_many_arguments)]
pub fn best_decomposed_sum(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    partitions: &[Vec<Vec<usize>>],
    s: f64,
    n: usize,
    n_max: usize,
    eps: &Q,
    f: &Potential,
    mode: Mode,
    cfg: &KernelConfig,
) -> Result<CountBound> {
    let trivial = vec![(0..cloud.len()).collect::<Vec<_>>()];
    let mut best: Option<CountBound> = None;
    for p in std::iter::once(&trivial).chain(partitions) {
        let b = packing_decomposed_sum(sys, cloud, p, s, n, n_max, eps, f, mode, cfg)?;
        if best.as_ref().is_none_or(|x| b.log_value < x.log_value) {
            best = Some(b);
        }
    }
    Ok(best.unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Vanishing,
    Exploding,
    Indeterminate,
}

/// Trend of log-sums along the `N` grid.
pub fn classify(logs: &[f64]) -> Classification {
    let steps: Vec<f64> = logs.windows(2).map(|w| w[1] - w[0]).collect();
    if steps.iter().all(|d| *d <= THETA_VANISH.ln()) {
        Classification::Vanishing
    } else if steps.iter().all(|d| *d >= THETA_EXPLODE.ln()) {
        Classification::Exploding
    } else {
        Classification::Indeterminate
    }
}

/// Grid and tolerances of a critical-exponent search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpSearch {
    pub n_grid: Vec<usize>,
    /// Candidate lengths run over `[N, N + span]`.
    pub span: usize,
    pub tolerance: f64,
}

impl Default for CpSearch {
    fn default() -> Self {
        CpSearch { n_grid: vec![2, 4, 6], span: 4, tolerance: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probe {
    pub s: f64,
    pub log_sums: Vec<f64>,
    pub class: Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalExponent {
    pub kind: CpKind,
    pub value: f64,
    pub bracket: (f64, f64),
    pub probes: Vec<Probe>,
    pub n_grid: Vec<usize>,
    /// The zone between the last exploding and first vanishing probe is
    /// wider than a clean exponential trend would leave.
    pub indeterminate: bool,
    pub bound_type: BoundType,
}

/// Locates the critical `s` where the `kind` sum along the `N` grid turns
/// from exploding to vanishing. Each edge of the indeterminate zone is found
/// by its own bisection; the reported bracket spans both.
#[allow(clippy::too_many_arguments)]
pub fn critical_exponent(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    kind: CpKind,
    eps: &Q,
    f: &Potential,
    s_bracket: (f64, f64),
    search: &CpSearch,
    mode: Mode,
    cfg: &KernelConfig,
) -> Result<CriticalExponent> {
    let grid = &search.n_grid;
    if grid.len() < 3 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("N grid needs at least 3 increasing values".into()));
    }
    let (lo, hi) = s_bracket;
    if !(lo < hi) {
        return Err(Error::BracketInvalid(format!("[{lo}, {hi}] is empty")));
    }
    let structures = par::try_map(grid, |&n| Candidates::build(sys, &cloud.points, kind, n, n + search.span, eps, f))?;
    let mut cache: BTreeMap<u64, Probe> = BTreeMap::new();
    let mut bound_type = BoundType::Exact;
    let mut probe = |s: f64| -> Result<Classification> {
        if let Some(p) = cache.get(&s.to_bits()) {
            return Ok(p.class);
        }
        let sums = par::try_map(&structures, |c| c.solve(s, mode, cfg))?;
        bound_type = sums[0].bound.bound_type;
        let log_sums: Vec<f64> = sums.iter().map(|x| x.bound.log_value).collect();
        let class = classify(&log_sums);
        cache.insert(s.to_bits(), Probe { s, log_sums, class });
        Ok(class)
    };
    let (c_lo, c_hi) = (probe(lo)?, probe(hi)?);
    if c_lo == c_hi || c_lo == Classification::Vanishing || c_hi == Classification::Exploding {
        return Err(Error::BracketInvalid(format!("classified {c_lo:?} at {lo} and {c_hi:?} at {hi}")));
    }
    // Largest exploding s.
    let mut edge_lo = lo;
    if c_lo == Classification::Exploding {
        let mut b = hi;
        while b - edge_lo > search.tolerance {
            let mid = 0.5 * (edge_lo + b);
            if probe(mid)? == Classification::Exploding {
                edge_lo = mid;
            } else {
                b = mid;
            }
        }
    }
    // Smallest vanishing s.
    let mut edge_hi = hi;
    if c_hi == Classification::Vanishing {
        let mut a = edge_lo;
        while edge_hi - a > search.tolerance {
            let mid = 0.5 * (a + edge_hi);
            if probe(mid)? == Classification::Vanishing {
                edge_hi = mid;
            } else {
                a = mid;
            }
        }
    }
    let min_step = grid.windows(2).map(|w| w[1] - w[0]).min().unwrap() as f64;
    let clean = 2.0 * THETA_EXPLODE.ln().max(THETA_VANISH.recip().ln()) / min_step;
    let indeterminate = c_lo != Classification::Exploding
        || c_hi != Classification::Vanishing
        || edge_hi - edge_lo > 2.0 * clean + 2.0 * search.tolerance;
    let probes: Vec<Probe> = {
        let mut v: Vec<Probe> = cache.into_values().collect();
        v.sort_by(|a, b| a.s.total_cmp(&b.s));
        v
    };
    Ok(CriticalExponent {
        kind,
        value: 0.5 * (edge_lo + edge_hi),
        bracket: (edge_lo, edge_hi),
        probes,
        n_grid: grid.clone(),
        indeterminate,
        bound_type,
    })
}

/// One finite-step check of `M^s_{N,3ε} ≤ P^{s - ln3·||f||}_{N,ε}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverPackingCheck {
    pub s: f64,
    pub n: usize,
    pub cover_log: f64,
    pub packing_log: f64,
    pub holds: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn cover_packing_check(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    s: f64,
    n: usize,
    n_max: usize,
    eps: &Q,
    f: &Potential,
    cfg: &KernelConfig,
) -> Result<CoverPackingCheck> {
    let three = *eps * Q::from_integer(3);
    let cover = bowen_cover_sum(sys, cloud, s, n, n_max, &three, f, Mode::Exact, cfg)?.bound.log_value;
    let shifted = s - 3f64.ln() * f.sup_norm(sys);
    let packing = packing_sum(sys, cloud, shifted, n, n_max, eps, f, Mode::Exact, cfg)?.bound.log_value;
    Ok(CoverPackingCheck {
        s,
        n,
        cover_log: cover,
        packing_log: packing,
        holds: crate::covering::log_le(cover, packing),
    })
}

pub mod oracle {
    //! Exhaustive-subset versions of the CP sums over the same candidate
    //! balls, for cross-checking the solvers on small clouds.

    use super::*;
    use crate::bowen::bowen_distance;
    use crate::covering::oracle::{max_packing_log, min_cover_log};

    fn balls(
        sys: &SystemSpec,
        cloud: &SampleCloud,
        n_lo: usize,
        n_hi: usize,
        eps: &Q,
        f: &Potential,
        closed: bool,
    ) -> Result<(Vec<u128>, Vec<(usize, f64)>)> {
        let pts = &cloud.points;
        let cut = checked_cut(sys, n_hi, eps)?;
        let mut masks = Vec::new();
        let mut meta = Vec::new();
        for x in pts.iter() {
            for n in n_lo..=n_hi {
                let mut m = 0u128;
                for (j, z) in pts.iter().enumerate() {
                    let d = bowen_distance(sys, x, z, n)?;
                    if if closed { cut.closed(d) } else { cut.open(d) } {
                        m |= 1 << j;
                    }
                }
                masks.push(m);
                meta.push((n, f.birkhoff_sum(sys, x, n)? * -to_f64(eps).ln()));
            }
        }
        Ok((masks, meta))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn bowen_cover_sum(
        sys: &SystemSpec,
        cloud: &SampleCloud,
        s: f64,
        n_lo: usize,
        n_hi: usize,
        eps: &Q,
        f: &Potential,
    ) -> Result<f64> {
        let (masks, meta) = balls(sys, cloud, n_lo, n_hi, eps, f, false)?;
        let logs: Vec<f64> = meta.iter().map(|&(n, w)| -(n as f64) * s + w).collect();
        let universe = (1u128 << cloud.len()) - 1;
        Ok(min_cover_log(universe, &masks, &logs)?.expect("every point lies in its own ball"))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn packing_sum(
        sys: &SystemSpec,
        cloud: &SampleCloud,
        s: f64,
        n_lo: usize,
        n_hi: usize,
        eps: &Q,
        f: &Potential,
    ) -> Result<f64> {
        let (masks, meta) = balls(sys, cloud, n_lo, n_hi, eps, f, true)?;
        let adj: Vec<u128> = (0..masks.len())
            .map(|a| {
                (0..masks.len()).filter(|&b| b != a && masks[a] & masks[b] != 0).fold(0u128, |acc, b| acc | 1 << b)
            })
            .collect();
        let logs: Vec<f64> = meta.iter().map(|&(n, w)| -(n as f64) * s + w).collect();
        max_packing_log(&adj, &logs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::systems::{sample_cloud, FiniteSystem, Scheme};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn finite(seed: u64, points: usize) -> (SystemSpec, SampleCloud) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = SystemSpec::Finite(FiniteSystem::random(&mut rng, points));
        let cloud = sample_cloud(&sys, Scheme::Grid, points, seed).unwrap();
        (sys, cloud)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn singleton_closed_forms() {
        let (sys, cloud) = finite(1, 5);
        let one = cloud.select(&[2], "x");
        let cfg = KernelConfig::default();
        let f = Potential::zero();
        let c = bowen_cover_sum(&sys, &one, 0.7, 2, 5, &q(1, 4), &f, Mode::Exact, &cfg).unwrap();
        assert!(close(c.bound.log_value, -5.0 * 0.7));
        assert_eq!(c.family.entries[0].n, 5);
        let p = packing_sum(&sys, &one, 0.7, 2, 5, &q(1, 4), &f, Mode::Exact, &cfg).unwrap();
        assert!(close(p.bound.log_value, -2.0 * 0.7));
    }

    #[test]
    fn zero_exponent_counts_balls() {
        let (sys, cloud) = finite(3, 9);
        let cfg = KernelConfig::default();
        let f = Potential::zero();
        let eps = q(1, 5);
        let c = bowen_cover_sum(&sys, &cloud, 0.0, 2, 4, &eps, &f, Mode::Exact, &cfg).unwrap();
        let r = crate::covering::exact_spanning_number(&sys, &cloud, 2, &eps, None, &cfg).unwrap();
        assert!(c.bound.log_value <= r.log_value + 1e-12);
        assert!((c.bound.value().round() - c.bound.value()).abs() < 1e-9);
    }

    #[test]
    fn separated_points_pack_fully() {
        // Far-apart fixed points: every closed ball holds only its center.
        let d = vec![vec![q(0, 1), q(1, 1), q(1, 1)], vec![q(1, 1), q(0, 1), q(1, 1)], vec![q(1, 1), q(1, 1), q(0, 1)]];
        let sys = SystemSpec::Finite(FiniteSystem::new(d, vec![0, 1, 2]).unwrap());
        let cloud = sample_cloud(&sys, Scheme::Grid, 3, 0).unwrap();
        let p = packing_sum(&sys, &cloud, 0.0, 1, 3, &q(1, 3), &Potential::zero(), Mode::Exact, &KernelConfig::default())
            .unwrap();
        assert!(close(p.bound.value(), 3.0));
    }

    #[test]
    fn decomposition() {
        let (sys, cloud) = finite(8, 6);
        let cfg = KernelConfig::default();
        let f = Potential::zero();
        let eps = q(1, 4);
        let whole = packing_sum(&sys, &cloud, 0.3, 2, 3, &eps, &f, Mode::Exact, &cfg).unwrap().bound.log_value;
        let trivial = vec![(0..6).collect::<Vec<_>>()];
        let t = packing_decomposed_sum(&sys, &cloud, &trivial, 0.3, 2, 3, &eps, &f, Mode::Exact, &cfg).unwrap();
        assert!(close(t.log_value, whole));
        let singles: Vec<Vec<usize>> = (0..6).map(|i| vec![i]).collect();
        let s = packing_decomposed_sum(&sys, &cloud, &singles, 0.3, 2, 3, &eps, &f, Mode::Exact, &cfg).unwrap();
        assert!(close(s.log_value, 6f64.ln() - 2.0 * 0.3));
        let missing = vec![vec![0, 1, 2]];
        assert!(matches!(
            packing_decomposed_sum(&sys, &cloud, &missing, 0.3, 2, 3, &eps, &f, Mode::Exact, &cfg),
            Err(Error::PartitionIncomplete(_))
        ));
    }

    fn set_partitions(items: &[usize]) -> Vec<Vec<Vec<usize>>> {
        let Some((&first, rest)) = items.split_first() else { return vec![vec![]] };
        let mut out = Vec::new();
        for p in set_partitions(rest) {
            for i in 0..p.len() {
                let mut q = p.clone();
                q[i].push(first);
                out.push(q);
            }
            let mut q = p.clone();
            q.push(vec![first]);
            out.push(q);
        }
        out
    }

    #[test]
    fn best_decomposition_is_minimal_over_enumeration() {
        let (sys, cloud) = finite(12, 5);
        let cfg = KernelConfig::default();
        let f = Potential::zero();
        let parts = set_partitions(&[0, 1, 2, 3, 4]);
        assert_eq!(parts.len(), 52);
        let all: Vec<f64> = parts
            .iter()
            .map(|p| packing_decomposed_sum(&sys, &cloud, p, 0.2, 1, 2, &q(1, 4), &f, Mode::Exact, &cfg).unwrap().log_value)
            .collect();
        let finest = all.iter().copied().fold(f64::INFINITY, f64::min);
        let best = best_decomposed_sum(&sys, &cloud, &parts[..10], 0.2, 1, 2, &q(1, 4), &f, Mode::Exact, &cfg).unwrap();
        assert!(best.log_value >= finest - 1e-12);
    }

    #[test]
    fn singleton_critical_value_brackets_zero() {
        let (sys, cloud) = finite(5, 4);
        let one = cloud.select(&[0], "x");
        let search = CpSearch { n_grid: vec![4, 8, 12], span: 2, tolerance: 1e-4 };
        for kind in [CpKind::Bowen, CpKind::Packing] {
            let c = critical_exponent(
                &sys, &one, kind, &q(1, 4), &Potential::zero(), (-1.0, 1.0), &search, Mode::Exact, &KernelConfig::default(),
            )
            .unwrap();
            assert!(c.bracket.0 <= 0.0 && 0.0 <= c.bracket.1, "{:?}", c.bracket);
            assert!(c.bracket.1 - c.bracket.0 < 0.5);
            assert!(!c.indeterminate);
        }
    }

    #[test]
    fn invalid_bracket() {
        let (sys, cloud) = finite(5, 4);
        let r = critical_exponent(
            &sys, &cloud, CpKind::Bowen, &q(1, 4), &Potential::zero(), (2.0, 3.0), &CpSearch::default(),
            Mode::Exact, &KernelConfig::default(),
        );
        assert!(matches!(r, Err(Error::BracketInvalid(_))));
    }

    #[test]
    fn constant_potential_shifts_critical_value() {
        let (sys, cloud) = finite(9, 6);
        let eps = q(1, 4);
        let cfg = KernelConfig::default();
        let search = CpSearch { n_grid: vec![3, 6, 9], span: 2, tolerance: 1e-6 };
        let shift = 0.5 * 4f64.ln();
        let base = critical_exponent(&sys, &cloud, CpKind::Bowen, &eps, &Potential::zero(), (-2.0, 2.0), &search, Mode::Exact, &cfg)
            .unwrap();
        let f = Potential::Constant(q(1, 2));
        let moved = critical_exponent(&sys, &cloud, CpKind::Bowen, &eps, &f, (-2.0 + shift, 2.0 + shift), &search, Mode::Exact, &cfg)
            .unwrap();
        assert!((moved.value - base.value - shift).abs() < 1e-5, "{} {}", moved.value, base.value);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn exact_matches_oracle(seed in 0u64..1000, s in -1.0f64..1.5, table in any::<bool>()) {
            let (sys, cloud) = finite(seed, 8);
            let f = if table {
                Potential::Table((0..8).map(|i| q((i * 7 % 5) as i64 - 2, 4)).collect())
            } else {
                Potential::zero()
            };
            let eps = q(1, 4);
            let cfg = KernelConfig::default();
            let c = bowen_cover_sum(&sys, &cloud, s, 2, 3, &eps, &f, Mode::Exact, &cfg).unwrap().bound.log_value;
            let co = oracle::bowen_cover_sum(&sys, &cloud, s, 2, 3, &eps, &f).unwrap();
            prop_assert!(close(c, co), "cover {c} oracle {co}");
            let p = packing_sum(&sys, &cloud, s, 2, 3, &eps, &f, Mode::Exact, &cfg).unwrap().bound.log_value;
            let po = oracle::packing_sum(&sys, &cloud, s, 2, 3, &eps, &f).unwrap();
            prop_assert!(close(p, po), "packing {p} oracle {po}");
        }

        #[test]
        fn sums_decrease_in_s(seed in 0u64..1000, s in -1.0f64..1.0) {
            let (sys, cloud) = finite(seed, 7);
            let cfg = KernelConfig::default();
            let f = Potential::zero();
            let eps = q(1, 3);
            for kind in [CpKind::Bowen, CpKind::Packing] {
                let c = Candidates::build(&sys, &cloud.points, kind, 2, 4, &eps, &f).unwrap();
                let a = c.solve(s, Mode::Exact, &cfg).unwrap().bound.log_value;
                let b = c.solve(s + 0.25, Mode::Exact, &cfg).unwrap().bound.log_value;
                prop_assert!(b < a);
            }
        }

        #[test]
        fn monotone_in_n(seed in 0u64..1000, s in -0.5f64..0.5) {
            let (sys, cloud) = finite(seed, 7);
            let cfg = KernelConfig::default();
            let f = Potential::zero();
            let eps = q(1, 3);
            let m = |n| bowen_cover_sum(&sys, &cloud, s, n, 6, &eps, &f, Mode::Exact, &cfg).unwrap().bound.log_value;
            let p = |n| packing_sum(&sys, &cloud, s, n, 6, &eps, &f, Mode::Exact, &cfg).unwrap().bound.log_value;
            prop_assert!(m(2) <= m(3) + 1e-12);
            prop_assert!(p(3) <= p(2) + 1e-12);
        }

        #[test]
        fn cover_at_three_eps_below_packing(seed in 0u64..1000, s in -1.0f64..1.0, n in 1usize..4) {
            let (sys, cloud) = finite(seed, 9);
            let f = Potential::Table((0..9).map(|i| q(i as i64 % 3 - 1, 3)).collect());
            let chk = cover_packing_check(&sys, &cloud, s, n, n + 2, &q(1, 10), &f, &KernelConfig::default()).unwrap();
            prop_assert!(chk.holds, "{chk:?}");
        }
    }
}
