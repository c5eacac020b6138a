//! Product-box constructions on shifts. A [`ConstraintSet`] is a set of words
//! cut out by conditions `d(T^j y, T^j r) < ε` (or `≤ ε`) for offsets `j` in a
//! finite list. Inner boxes certify lower bounds on separated numbers and
//! grids of centers certify upper bounds on spanning numbers of such sets.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{scaled_floor_ceil, serde_q, Q};
use crate::systems::{Closure, Cut, ShiftSystem};

use super::{BoundType, CountBound, Method};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintSet {
    /// Reference word; may run past the horizon, in which case the extra
    /// coordinates are compared against padding.
    pub reference: Vec<u16>,
    pub offsets: Vec<usize>,
    #[serde(with = "serde_q")]
    pub radius: Q,
    pub closure: Closure,
}

fn at(word: &[u16], k: usize) -> u16 {
    word.get(k).copied().unwrap_or(0)
}

fn radius_cut(s: &ShiftSystem, eps: &Q) -> Cut {
    let (le, lt) = scaled_floor_ceil(eps, s.unit());
    Cut::Exact { lt, le }
}

fn within(cut: &Cut, v: u128, closure: Closure) -> bool {
    match (cut, closure) {
        (Cut::Exact { lt, .. }, Closure::Open) => v < *lt,
        (Cut::Exact { le, .. }, Closure::Closed) => v <= *le,
        _ => unreachable!("shift cuts are exact"),
    }
}

impl ConstraintSet {
    /// The whole shift space.
    pub fn whole(s: &ShiftSystem) -> Self {
        ConstraintSet { reference: vec![0; s.horizon()], offsets: vec![], radius: Q::from_integer(1), closure: Closure::Open }
    }

    /// `{y : d(T^j y, T^j x) ≤ ε for j ∈ [m, n]}`.
    pub fn block(x: &[u16], eps: Q, m: usize, n: usize) -> Self {
        ConstraintSet { reference: x.to_vec(), offsets: (m..=n).collect(), radius: eps, closure: Closure::Closed }
    }

    /// The open Bowen ball `B_n(x, ε)`.
    pub fn tail_ball(x: &[u16], eps: Q, n: usize) -> Self {
        ConstraintSet { reference: x.to_vec(), offsets: (0..n).collect(), radius: eps, closure: Closure::Open }
    }

    /// `T^{-n} B(x, ε)`.
    pub fn preimage_of_ball(x: &[u16], eps: Q, n: usize) -> Self {
        let mut reference = vec![0; n];
        reference.extend_from_slice(x);
        ConstraintSet { reference, offsets: vec![n], radius: eps, closure: Closure::Open }
    }

    /// `T^{-n} W_{ε,[0,depth-1]}(x)`.
    pub fn preimage_of_block(x: &[u16], eps: Q, n: usize, depth: usize) -> Self {
        let mut reference = vec![0; n];
        reference.extend_from_slice(x);
        ConstraintSet { reference, offsets: (n..n + depth).collect(), radius: eps, closure: Closure::Closed }
    }

    pub fn validate(&self, s: &ShiftSystem) -> Result<()> {
        if let Some(&c) = self.reference.iter().find(|&&c| c as usize >= s.alphabet_size()) {
            return Err(Error::InvalidPoint(format!("symbol {c} outside alphabet")));
        }
        if self.radius <= Q::from_integer(0) {
            return Err(Error::InvalidConfig("constraint radius must be positive".into()));
        }
        if self.offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("constraint offsets must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Tightest offset acting on coordinate `k`: the largest `j ≤ k` with
    /// `k < j + H`.
    pub fn binding_offset(&self, s: &ShiftSystem, k: usize) -> Option<usize> {
        self.offsets.iter().rev().copied().find(|&j| j <= k && k < j + s.horizon())
    }

    fn span(&self, s: &ShiftSystem) -> usize {
        s.horizon().max(self.reference.len())
    }

    /// Checks every constraint against a deviation profile, one entry per
    /// coordinate in level units.
    fn admits(&self, s: &ShiftSystem, dev: &[u64], cut: &Cut) -> bool {
        let h = s.horizon();
        self.offsets.iter().all(|&j| {
            let v: u128 = (0..h)
                .filter(|i| j + i < dev.len())
                .map(|i| (dev[j + i] as u128) << (h - 1 - i))
                .sum();
            within(cut, v, self.closure)
        })
    }

    fn deviations(&self, s: &ShiftSystem, y: &[u16]) -> Vec<u64> {
        let a = s.scaled_levels();
        (0..self.span(s))
            .map(|k| {
                let yk = if k < s.horizon() { at(y, k) } else { 0 };
                a[yk as usize].abs_diff(a[at(&self.reference, k) as usize])
            })
            .collect()
    }

    pub fn contains(&self, s: &ShiftSystem, y: &[u16]) -> bool {
        let cut = radius_cut(s, &self.radius);
        self.admits(s, &self.deviations(s, y), &cut)
    }

    /// Per-coordinate symbols allowed by the single strongest term acting on
    /// each coordinate. Every member of the set lies in this product.
    pub fn outer_bands(&self, s: &ShiftSystem) -> Vec<Vec<u16>> {
        let h = s.horizon();
        let a = s.scaled_levels();
        let cut = radius_cut(s, &self.radius);
        (0..h)
            .map(|k| {
                let all = (0..s.alphabet_size() as u16).collect::<Vec<_>>();
                match self.binding_offset(s, k) {
                    None => all,
                    Some(j) => {
                        let r = a[at(&self.reference, k) as usize];
                        all.into_iter()
                            .filter(|&t| within(&cut, (a[t as usize].abs_diff(r) as u128) << (h - 1 - (k - j)), self.closure))
                            .collect()
                    }
                }
            })
            .collect()
    }

    /// Rejection sampling from the outer bands. Returns at most `count`
    /// members after at most `tries` draws.
    pub fn sample_members(&self, s: &ShiftSystem, rng: &mut impl Rng, count: usize, tries: usize) -> Vec<Vec<u16>> {
        let bands = self.outer_bands(s);
        let mut out = Vec::new();
        for _ in 0..tries {
            if out.len() == count {
                break;
            }
            let y: Vec<u16> = bands.iter().map(|b| b[rng.gen_range(0..b.len())]).collect();
            if self.contains(s, &y) {
                out.push(y);
            }
        }
        out
    }
}

fn check_scale(s: &ShiftSystem, set: &ConstraintSet, n: usize, delta: &Q) -> Result<()> {
    set.validate(s)?;
    if n == 0 || n > s.horizon() {
        return Err(Error::InvalidConfig(format!("Bowen length {n} outside 1..={}", s.horizon())));
    }
    if *delta <= Q::from_integer(0) {
        return Err(Error::InvalidConfig("resolution must be positive".into()));
    }
    let needed = ShiftSystem::required_horizon(n, delta);
    if needed > s.horizon() {
        return Err(Error::HorizonExceeded { needed, horizon: s.horizon() });
    }
    Ok(())
}

fn sorted_symbols(s: &ShiftSystem) -> Vec<u16> {
    let a = s.scaled_levels();
    let mut order: Vec<u16> = (0..s.alphabet_size() as u16).collect();
    order.sort_by_key(|&t| a[t as usize]);
    order
}

/// A product of per-coordinate symbol sets, pairwise `(n, δ)`-separated and
/// contained in its constraint set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductBox {
    pub symbols: Vec<Vec<u16>>,
    pub log_count: f64,
}

impl ProductBox {
    pub fn count(&self) -> Option<u128> {
        self.symbols.iter().try_fold(1u128, |acc, c| acc.checked_mul(c.len() as u128))
    }

    /// Member with the given mixed-radix digits (one per coordinate).
    pub fn member(&self, digits: &[usize]) -> Vec<u16> {
        self.symbols.iter().zip(digits).map(|(c, &d)| c[d]).collect()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<u16> {
        self.symbols.iter().map(|c| c[rng.gen_range(0..c.len())]).collect()
    }

    pub fn bound(&self) -> CountBound {
        CountBound {
            log_value: self.log_count,
            bound_type: BoundType::Lower,
            method: Method::Construction,
            witness: None,
            caveats: vec![],
        }
    }
}

/// For each size `m`, a δ-spaced set of `m` symbols minimizing the largest
/// deviation from `reference`, as `(deviation, symbols)`.
fn spaced_options(s: &ShiftSystem, order: &[u16], reference: u16, delta: &Q) -> Vec<(u64, Vec<u16>)> {
    let a = s.scaled_levels();
    let d = s.level_denominator() as u128;
    let (num, den) = (*delta.numer() as u128, *delta.denom() as u128);
    let spaced = |lo: u64, hi: u64| (hi - lo) as u128 * den >= num * d;
    let r = a[reference as usize];
    let mut options = vec![(0u64, vec![reference])];
    for m in 2..=order.len() {
        let mut best: Option<(u64, Vec<u16>)> = None;
        for start in 0..order.len() {
            let mut pick = vec![order[start]];
            for &t in &order[start + 1..] {
                if pick.len() == m {
                    break;
                }
                if spaced(a[*pick.last().unwrap() as usize], a[t as usize]) {
                    pick.push(t);
                }
            }
            if pick.len() < m {
                break;
            }
            let dev = pick.iter().map(|&t| a[t as usize].abs_diff(r)).max().unwrap();
            if best.as_ref().is_none_or(|(b, _)| dev < *b) {
                best = Some((dev, pick));
            }
        }
        match best {
            Some(b) => options.push(b),
            None => break,
        }
    }
    options
}

/// Lower bound on the `(n, δ)`-separated number of `set`: coordinates below
/// `n` range over δ-spaced symbol sets, the rest are pinned to the reference.
/// Constrained coordinates are widened greedily by log-gain per weighted
/// deviation until no constraint admits a further step.
pub fn separated_box(s: &ShiftSystem, set: &ConstraintSet, n: usize, delta: &Q) -> Result<ProductBox> {
    check_scale(s, set, n, delta)?;
    let h = s.horizon();
    let a = s.scaled_levels();
    let order = sorted_symbols(s);
    let cut = radius_cut(s, &set.radius);
    let span = set.span(s);

    let mut options: Vec<Vec<(u64, Vec<u16>)>> = Vec::with_capacity(n);
    let mut choice = vec![0usize; n];
    let mut free = vec![false; n];
    for k in 0..n {
        let opts = spaced_options(s, &order, at(&set.reference, k), delta);
        if set.binding_offset(s, k).is_none() {
            free[k] = true;
            choice[k] = opts.len() - 1;
        }
        options.push(opts);
    }
    let mut dev: Vec<u64> = (0..span)
        .map(|k| if k < h { 0 } else { a[0].abs_diff(a[at(&set.reference, k) as usize]) })
        .collect();
    for k in 0..n {
        if !free[k] {
            dev[k] = options[k][0].0;
        }
    }
    if !set.admits(s, &dev, &cut) {
        return Err(Error::EmptyNeighborhood("reference word violates its own constraints".into()));
    }

    loop {
        let mut best: Option<(f64, usize)> = None;
        for k in (0..n).filter(|&k| !free[k]) {
            let next = choice[k] + 1;
            if next >= options[k].len() {
                continue;
            }
            let old = dev[k];
            dev[k] = options[k][next].0;
            let ok = set.admits(s, &dev, &cut);
            let step = dev[k].saturating_sub(old) as f64;
            dev[k] = old;
            if !ok {
                continue;
            }
            let j = set.binding_offset(s, k).unwrap();
            let cost = step * 0.5f64.powi((k - j) as i32);
            let gain = ((next + 1) as f64 / next as f64).ln();
            let score = if cost == 0.0 { f64::INFINITY } else { gain / cost };
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, k));
            }
        }
        let Some((_, k)) = best else { break };
        choice[k] += 1;
        dev[k] = options[k][choice[k]].0;
    }

    let mut symbols: Vec<Vec<u16>> = (0..n).map(|k| options[k][choice[k]].1.clone()).collect();
    symbols.extend((n..h).map(|k| vec![at(&set.reference, k)]));
    let log_count = symbols.iter().map(|c| (c.len() as f64).ln()).sum();
    Ok(ProductBox { symbols, log_count })
}

/// Centers `Π_k C_k`: every member of the constraint set is within open
/// Bowen distance δ of the word of its coordinatewise nearest centers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CenterGrid {
    pub centers: Vec<Vec<u16>>,
    pub log_count: f64,
}

impl CenterGrid {
    pub fn count(&self) -> Option<u128> {
        self.centers.iter().try_fold(1u128, |acc, c| acc.checked_mul(c.len() as u128))
    }

    pub fn decode(&self, s: &ShiftSystem, y: &[u16]) -> Vec<u16> {
        let a = s.scaled_levels();
        self.centers
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let v = a[at(y, k) as usize];
                *c.iter().min_by_key(|&&t| (a[t as usize].abs_diff(v), a[t as usize])).unwrap()
            })
            .collect()
    }

    pub fn bound(&self) -> CountBound {
        CountBound {
            log_value: self.log_count,
            bound_type: BoundType::Upper,
            method: Method::Construction,
            witness: None,
            caveats: vec![],
        }
    }
}

/// Best single center of a sorted band and its largest deviation.
fn single_center(a: &[u64], order: &[u16], band: &[u16]) -> (u16, u64) {
    let lo = a[band[0] as usize];
    let hi = a[*band.last().unwrap() as usize];
    order
        .iter()
        .map(|&t| (t, a[t as usize].abs_diff(lo).max(a[t as usize].abs_diff(hi))))
        .min_by_key(|&(t, d)| (d, a[t as usize]))
        .unwrap()
}

/// Greedy left-to-right cover of a sorted band by radius-`rho` centers.
fn interval_cover(a: &[u64], order: &[u16], band: &[u16], rho: u64) -> (Vec<u16>, u64) {
    let mut centers = Vec::new();
    let mut dev = 0u64;
    let mut i = 0;
    while i < band.len() {
        let left = a[band[i] as usize];
        let reach = left.saturating_add(rho);
        let pos = order.partition_point(|&t| a[t as usize] <= reach);
        let c = order[pos - 1];
        let ac = a[c as usize];
        while i < band.len() && a[band[i] as usize] <= ac.saturating_add(rho) {
            dev = dev.max(a[band[i] as usize].abs_diff(ac));
            i += 1;
        }
        centers.push(c);
    }
    if centers.len() == 1 {
        let (c, d) = single_center(a, order, band);
        return (vec![c], d);
    }
    (centers, dev)
}

/// Upper bound on the `(n, δ)`-spanning number of `set` with centers in the
/// whole shift. Searches a uniform covering radius `ρ` over level gaps and,
/// for each, the shortest covered prefix `K ≥ n` after which single centers
/// suffice.
pub fn spanning_grid(s: &ShiftSystem, set: &ConstraintSet, n: usize, delta: &Q) -> Result<CenterGrid> {
    check_scale(s, set, n, delta)?;
    let h = s.horizon();
    let a = s.scaled_levels();
    let order = sorted_symbols(s);
    let cut = radius_cut(s, delta);
    let bands: Vec<Vec<u16>> = set
        .outer_bands(s)
        .into_iter()
        .map(|mut b| {
            b.sort_by_key(|&t| a[t as usize]);
            b
        })
        .collect();
    let singles: Vec<(u16, u64)> = bands.iter().map(|b| single_center(a, &order, b)).collect();

    let mut gaps: Vec<u64> = order.iter().map(|&t| a[t as usize] - a[order[0] as usize]).collect();
    gaps.sort_unstable();
    gaps.dedup();

    let spans_within = |dev: &[u64]| {
        (0..n).all(|j| {
            let v: u128 = (0..h - j).map(|i| (dev[j + i] as u128) << (h - 1 - i)).sum();
            within(&cut, v, Closure::Open)
        })
    };

    let mut best: Option<(f64, Vec<Vec<u16>>)> = None;
    for &rho in &gaps {
        let covers: Vec<(Vec<u16>, u64)> = bands.iter().map(|b| interval_cover(a, &order, b, rho)).collect();
        let mut dev: Vec<u64> = singles.iter().map(|x| x.1).collect();
        for (k, cover) in covers.iter().enumerate().take(n) {
            dev[k] = cover.1;
        }
        for kk in n..=h {
            if kk > n {
                dev[kk - 1] = covers[kk - 1].1;
            }
            if !spans_within(&dev) {
                continue;
            }
            let log: f64 = covers[..kk].iter().map(|c| (c.0.len() as f64).ln()).sum();
            if best.as_ref().is_none_or(|(b, _)| log < *b - 1e-12) {
                let mut centers: Vec<Vec<u16>> = covers[..kk].iter().map(|c| c.0.clone()).collect();
                centers.extend(singles[kk..].iter().map(|x| vec![x.0]));
                best = Some((log, centers));
            }
            break;
        }
    }
    let (log_count, centers) = best.expect("zero radius with the full prefix always spans");
    Ok(CenterGrid { centers, log_count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_words(k: u16, h: usize) -> Vec<Vec<u16>> {
        let mut out = vec![vec![]];
        for _ in 0..h {
            out = out.into_iter().flat_map(|w| (0..k).map(move |c| [w.clone(), vec![c]].concat())).collect();
        }
        out
    }

    fn bowen_units(s: &ShiftSystem, x: &[u16], y: &[u16], n: usize) -> u128 {
        s.window_distance(x, y, 0, n - 1)
    }

    fn lt(s: &ShiftSystem, eps: &Q) -> u128 {
        scaled_floor_ceil(eps, s.unit()).1
    }

    /// Exhaustive certificate check on a tiny shift: the box lies in the set
    /// and is separated, and every member of the set decodes to a center
    /// within δ.
    fn certify(s: &ShiftSystem, set: &ConstraintSet, n: usize, delta: &Q) -> (u128, u128) {
        let bx = separated_box(s, set, n, delta).unwrap();
        let grid = spanning_grid(s, set, n, delta).unwrap();
        let cap = lt(s, delta);
        let mut members = vec![vec![]];
        for c in &bx.symbols {
            members = members.into_iter().flat_map(|w| c.iter().map(move |&t| [w.clone(), vec![t]].concat())).collect();
        }
        for (i, y) in members.iter().enumerate() {
            assert!(set.contains(s, y), "box member {y:?} outside the set");
            for z in &members[i + 1..] {
                assert!(bowen_units(s, y, z, n) >= cap);
            }
        }
        let mut inside = 0u128;
        for y in all_words(s.alphabet_size() as u16, s.horizon()) {
            if set.contains(s, &y) {
                inside += 1;
                let c = grid.decode(s, &y);
                assert!(bowen_units(s, &y, &c, n) < cap, "{y:?} not covered");
            }
        }
        assert!(inside >= members.len() as u128);
        (bx.count().unwrap(), grid.count().unwrap())
    }

    #[test]
    fn certificates_hold_on_small_shifts() {
        let s = ShiftSystem::grid(2, 6).unwrap();
        let x = vec![1u16, 0, 2, 1, 0, 0];
        let sets = [
            ConstraintSet::whole(&s),
            ConstraintSet::tail_ball(&x, q(1, 2), 1),
            ConstraintSet::block(&x, q(1, 2), 0, 1),
            ConstraintSet::preimage_of_ball(&x, q(3, 4), 1),
        ];
        for set in &sets {
            let (lo, hi) = certify(&s, set, 1, &q(1, 2));
            assert!(lo >= 1 && lo <= hi, "{set:?}: {lo} {hi}");
        }
    }

    #[test]
    fn whole_grid_counts() {
        let s = ShiftSystem::grid(64, 20).unwrap();
        let set = ConstraintSet::whole(&s);
        for (delta, per) in [(q(1, 4), 5u128), (q(1, 8), 9), (q(1, 32), 33)] {
            let bx = separated_box(&s, &set, 3, &delta).unwrap();
            assert_eq!(bx.count(), Some(per.pow(3)));
        }
        let grid = spanning_grid(&s, &set, 3, &q(1, 4)).unwrap();
        let c = grid.count().unwrap();
        assert!(c >= 125, "{c}");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cap = lt(&s, &q(1, 4));
        for y in set.sample_members(&s, &mut rng, 500, 500) {
            assert!(bowen_units(&s, &y, &grid.decode(&s, &y), 3) < cap);
        }
    }

    #[test]
    fn tail_ball_beats_spread_construction() {
        // x = 0, ε = 1/2, δ = 1/24: spread sets x_i + jδ, j = 0..=4, give 5ⁿ.
        let s = ShiftSystem::grid(24, 24).unwrap();
        let x = vec![0u16; 24];
        for n in 1..=4 {
            let bx = separated_box(&s, &ConstraintSet::tail_ball(&x, q(1, 2), n), n, &q(1, 24)).unwrap();
            assert!(bx.count().unwrap() >= 5u128.pow(n as u32), "n={n}: {:?}", bx.count());
        }
    }

    #[test]
    fn sampled_members_respect_box_and_grid() {
        let s = ShiftSystem::grid(16, 20).unwrap();
        let mut x = vec![8u16; 20];
        x[3] = 2;
        let set = ConstraintSet::block(&x, q(1, 2), 0, 2);
        let delta = q(1, 8);
        let bx = separated_box(&s, &set, 5, &delta).unwrap();
        let grid = spanning_grid(&s, &set, 5, &delta).unwrap();
        let cap = lt(&s, &delta);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec<u16>> = (0..200).map(|_| bx.sample(&mut rng)).collect();
        for (i, y) in pts.iter().enumerate() {
            assert!(set.contains(&s, y));
            for z in &pts[i + 1..] {
                assert!(y == z || bowen_units(&s, y, z, 5) >= cap);
            }
        }
        for y in set.sample_members(&s, &mut rng, 300, 20_000) {
            assert!(bowen_units(&s, &y, &grid.decode(&s, &y), 5) < cap);
        }
        assert!(bx.log_count <= grid.log_count + 1e-12);
    }

    #[test]
    fn horizon_is_enforced() {
        let s = ShiftSystem::grid(4, 6).unwrap();
        let set = ConstraintSet::whole(&s);
        assert!(matches!(separated_box(&s, &set, 4, &q(1, 4)), Err(Error::HorizonExceeded { .. })));
    }
}
