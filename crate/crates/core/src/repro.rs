//! The three explicit families on the full shift `[0,1]^ℕ` with metric
//! `d(x,y) = Σ 2^{-i}|x_i - y_i|`: a spanning family `E1` of the whole
//! space, a separated family `E2` inside a Bowen ball and a separated family
//! `E3` of preimages of a point. Points are eventually constant rational
//! sequences, so every distance below is exact.

use std::fmt;

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par;
use crate::rational::{floor_q, format_q, Q};

type R = Ratio<i128>;

fn wide(v: &Q) -> R {
    R::new(*v.numer() as i128, *v.denom() as i128)
}

/// `(x_0, …, x_{L-1}, t, t, …)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RWord {
    pub prefix: Vec<Q>,
    pub tail: Q,
}

impl RWord {
    pub fn constant(t: Q) -> Self {
        RWord { prefix: vec![], tail: t }
    }

    pub fn at(&self, i: usize) -> Q {
        self.prefix.get(i).copied().unwrap_or(self.tail)
    }

    /// `σ^k`.
    pub fn shift(&self, k: usize) -> RWord {
        RWord { prefix: self.prefix.iter().skip(k).copied().collect(), tail: self.tail }
    }

    fn in_unit_cube(&self) -> bool {
        let (z, o) = (Q::zero(), Q::from_integer(1));
        self.prefix.iter().chain([&self.tail]).all(|v| *v >= z && *v <= o)
    }
}

impl Serialize for RWord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("RWord", 2)?;
        st.serialize_field("prefix", &self.prefix.iter().map(format_q).collect::<Vec<_>>())?;
        st.serialize_field("tail", &format_q(&self.tail))?;
        st.end()
    }
}

impl fmt::Display for RWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.prefix.iter().map(format_q).collect();
        write!(f, "({}; {}…)", body.join(", "), format_q(&self.tail))
    }
}

/// `d(x, y)`, exact.
pub fn distance(x: &RWord, y: &RWord) -> R {
    let len = x.prefix.len().max(y.prefix.len());
    let mut acc = R::zero();
    let mut w = R::from_integer(1);
    let half = R::new(1, 2);
    for i in 0..len {
        acc += (wide(&x.at(i)) - wide(&y.at(i))).abs() * w;
        w *= half;
    }
    // Σ_{i≥len} 2^{-i} = 2^{1-len}
    acc + (wide(&x.tail) - wide(&y.tail)).abs() * w * R::from_integer(2)
}

/// `d_n(x, y) = max_{0≤j<n} d(σ^j x, σ^j y)`.
pub fn bowen_distance(x: &RWord, y: &RWord, n: usize) -> R {
    (0..n).map(|j| distance(&x.shift(j), &y.shift(j))).max().unwrap_or_else(R::zero)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Construction {
    E1,
    E2,
    E3,
}

/// A product family: coordinate `i < coords.len()` ranges over `coords[i]`
/// and the rest of the word is `suffix`. Members are indexed in mixed radix
/// with the first coordinate most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionFamily {
    pub name: Construction,
    pub n: usize,
    pub epsilon: Option<Q>,
    pub delta: Option<Q>,
    pub base_point: Option<RWord>,
    pub coords: Vec<Vec<Q>>,
    pub suffix: RWord,
    pub cardinality_formula_value: u128,
    /// Replaced members, for fault injection.
    pub overrides: Vec<(u128, RWord)>,
}

fn floor_plus_one(v: Q) -> u128 {
    (floor_q(&v) + 1) as u128
}

fn pow(base: u128, e: usize) -> u128 {
    base.checked_pow(e as u32).unwrap_or(u128::MAX)
}

/// `l = [log₂(2/ε)] + 1`.
pub fn tail_length(eps: &Q) -> usize {
    let mut l = 0usize;
    // largest l with 2^l ≤ 2/ε
    let two_over = Q::from_integer(2) / *eps;
    while Q::from_integer(1i64 << (l + 1)) <= two_over {
        l += 1;
    }
    l + 1
}

fn check_open_unit(v: &Q, what: &str) -> Result<()> {
    if *v <= Q::zero() || *v >= Q::from_integer(1) {
        return Err(Error::InvalidConfig(format!("{what} must lie in (0, 1), got {}", format_q(v))));
    }
    Ok(())
}

/// `x_i ∈ {(ε/3)j : j = 0..[3/ε]}` for `i < n + l`, then `1` forever.
pub fn construct_e1(n: usize, eps: Q) -> Result<ConstructionFamily> {
    check_open_unit(&eps, "ε")?;
    let l = tail_length(&eps);
    let k = floor_q(&(Q::from_integer(3) / eps));
    let a1: Vec<Q> = (0..=k).map(|j| eps / Q::from_integer(3) * Q::from_integer(j)).collect();
    Ok(ConstructionFamily {
        name: Construction::E1,
        n,
        epsilon: Some(eps),
        delta: None,
        base_point: None,
        coords: vec![a1; n + l],
        suffix: RWord::constant(Q::from_integer(1)),
        cardinality_formula_value: pow(floor_plus_one(Q::from_integer(3) / eps), n + l),
        overrides: vec![],
    })
}

/// `y_i ∈ {x_i + jδ : j = 0..[ε/(3δ)]}` for `i < n`, then `x_n, x_{n+1}, …`.
pub fn construct_e2(x: &RWord, n: usize, eps: Q, delta: Q) -> Result<ConstructionFamily> {
    check_open_unit(&delta, "δ")?;
    let half = Q::new(1, 2);
    if eps <= Q::zero() || eps > half {
        return Err(Error::InvalidConfig(format!("ε must lie in (0, 1/2], got {}", format_q(&eps))));
    }
    if let Some(v) = x.prefix.iter().chain([&x.tail]).find(|v| **v < Q::zero() || **v > half) {
        return Err(Error::BasePointOutOfRange(format!("coordinate {} outside [0, 1/2]", format_q(v))));
    }
    let k = floor_q(&(eps / (Q::from_integer(3) * delta)));
    let coords = (0..n).map(|i| (0..=k).map(|j| x.at(i) + delta * Q::from_integer(j)).collect()).collect();
    Ok(ConstructionFamily {
        name: Construction::E2,
        n,
        epsilon: Some(eps),
        delta: Some(delta),
        base_point: Some(x.clone()),
        coords,
        suffix: x.shift(n),
        cardinality_formula_value: pow(floor_plus_one(eps / (Q::from_integer(3) * delta)), n),
        overrides: vec![],
    })
}

/// `y_i ∈ {jδ : j = 0..[1/δ]}` for `i < n`, then `x_0, x_1, …`.
pub fn construct_e3(x: &RWord, n: usize, delta: Q) -> Result<ConstructionFamily> {
    check_open_unit(&delta, "δ")?;
    if !x.in_unit_cube() {
        return Err(Error::BasePointOutOfRange(format!("{x} is not in [0,1]^N")));
    }
    let k = floor_q(&(Q::from_integer(1) / delta));
    let a3: Vec<Q> = (0..=k).map(|j| delta * Q::from_integer(j)).collect();
    Ok(ConstructionFamily {
        name: Construction::E3,
        n,
        epsilon: None,
        delta: Some(delta),
        base_point: Some(x.clone()),
        coords: vec![a3; n],
        suffix: x.clone(),
        cardinality_formula_value: pow(floor_plus_one(Q::from_integer(1) / delta), n),
        overrides: vec![],
    })
}

impl ConstructionFamily {
    /// Product of the coordinate set sizes.
    pub fn len(&self) -> u128 {
        self.coords.iter().fold(1u128, |a, c| a.saturating_mul(c.len() as u128))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn assemble(&self, choice: Vec<Q>) -> RWord {
        let mut prefix = choice;
        prefix.extend_from_slice(&self.suffix.prefix);
        RWord { prefix, tail: self.suffix.tail }
    }

    pub fn member(&self, index: u128) -> RWord {
        if let Some((_, w)) = self.overrides.iter().find(|(i, _)| *i == index) {
            return w.clone();
        }
        let mut rest = index;
        let mut choice = vec![Q::zero(); self.coords.len()];
        for (i, c) in self.coords.iter().enumerate().rev() {
            let b = c.len() as u128;
            choice[i] = c[(rest % b) as usize];
            rest /= b;
        }
        self.assemble(choice)
    }

    pub fn members(&self) -> impl Iterator<Item = RWord> + '_ {
        (0..self.len()).map(|i| self.member(i))
    }

    /// Index of the member nearest to `y` in every chosen coordinate; the
    /// nearest member in every `d_n` as well, since `d_n` is monotone in each
    /// coordinate deviation.
    pub fn nearest(&self, y: &RWord) -> u128 {
        self.coords.iter().enumerate().fold(0u128, |acc, (i, c)| {
            let v = y.at(i);
            let best = (0..c.len()).min_by_key(|&t| ((c[t] - v).abs(), t)).unwrap();
            acc * c.len() as u128 + best as u128
        })
    }

    pub fn with_override(mut self, index: u128, w: RWord) -> Self {
        self.overrides.retain(|(i, _)| *i != index);
        self.overrides.push((index, w));
        self
    }
}

/// `count` words of prefix length `len` with coordinates in
/// `{j/denominator}` and tail `0`.
pub fn random_words(count: usize, len: usize, denominator: i64, seed: u64) -> Vec<RWord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| RWord {
            prefix: (0..len).map(|_| Q::new(rng.gen_range(0..=denominator), denominator)).collect(),
            tail: Q::zero(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Property {
    Spanning { n: usize, #[serde(with = "crate::rational::serde_q")] epsilon: Q },
    Separated { n: usize, #[serde(with = "crate::rational::serde_q")] delta: Q },
    /// Every member lies in the open Bowen ball `B_n(center, ε)`.
    InBall { center: RWord, n: usize, #[serde(with = "crate::rational::serde_q")] epsilon: Q },
    /// `σ^n` of every member equals `target`.
    Preimage { target: RWord, n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub first: RWord,
    pub second: Option<RWord>,
    pub distance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub property: Property,
    pub pass: bool,
    /// Items (points or pairs) examined.
    pub checked: u128,
    pub total: u128,
    /// `checked / total`; below one when pairs were sampled.
    pub coverage: f64,
    pub sampled: bool,
    /// No cloud points to span: the pass is vacuous.
    pub vacuous: bool,
    pub counterexample: Option<Counterexample>,
}

fn render(r: &R) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn report(property: Property, checked: u128, total: u128, sampled: bool, cx: Option<Counterexample>) -> VerifyReport {
    VerifyReport {
        property,
        pass: cx.is_none(),
        checked,
        total,
        coverage: if total == 0 { 1.0 } else { checked as f64 / total as f64 },
        sampled,
        vacuous: total == 0,
        counterexample: cx,
    }
}

/// Checks `property` on `family`. Pairwise scans run in full when there are
/// at most `budget` pairs and on `budget` seeded random pairs otherwise.
pub fn verify_family(family: &ConstructionFamily, property: &Property, cloud: &[RWord], budget: usize, seed: u64) -> Result<VerifyReport> {
    let size = family.len();
    match property {
        Property::Spanning { n, epsilon } => {
            let eps = wide(epsilon);
            let misses = par::map(cloud, |y| {
                let near = family.member(family.nearest(y));
                let d = bowen_distance(y, &near, *n);
                if d < eps {
                    return None;
                }
                if !family.overrides.is_empty() && size <= budget as u128
                    && family.members().any(|m| bowen_distance(y, &m, *n) < eps) {
                        return None;
                    }
                Some(Counterexample { first: y.clone(), second: Some(near), distance: render(&d) })
            });
            let cx = misses.into_iter().flatten().next();
            Ok(report(property.clone(), cloud.len() as u128, cloud.len() as u128, false, cx))
        }
        Property::Separated { n, delta } => {
            let d0 = wide(delta);
            let total = size.saturating_mul(size.saturating_sub(1)) / 2;
            let bad = |i: u128, j: u128| {
                let (a, b) = (family.member(i), family.member(j));
                let d = bowen_distance(&a, &b, *n);
                (d < d0).then(|| Counterexample { first: a, second: Some(b), distance: render(&d) })
            };
            if total <= budget as u128 {
                let rows: Vec<usize> = (0..size as usize).collect();
                let found = par::map(&rows, |&i| ((i + 1) as u128..size).find_map(|j| bad(i as u128, j)));
                Ok(report(property.clone(), total, total, false, found.into_iter().flatten().next()))
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut pairs: Vec<(u128, u128)> = family.overrides.iter().map(|(i, _)| (*i, (*i + 1) % size)).collect();
                while pairs.len() < budget {
                    let i = rng.gen_range(0..size);
                    let j = rng.gen_range(0..size);
                    if i != j {
                        pairs.push((i.min(j), i.max(j)));
                    }
                }
                let found = par::map(&pairs, |&(i, j)| bad(i, j));
                Ok(report(property.clone(), pairs.len() as u128, total, true, found.into_iter().flatten().next()))
            }
        }
        Property::InBall { center, n, epsilon } => {
            scan_members(family, property, budget, |m| {
                let d = bowen_distance(m, center, *n);
                (d >= wide(epsilon)).then(|| Counterexample { first: m.clone(), second: Some(center.clone()), distance: render(&d) })
            })
        }
        Property::Preimage { target, n } => scan_members(family, property, budget, |m| {
            let img = m.shift(*n);
            let d = distance(&img, target);
            (!d.is_zero()).then(|| Counterexample { first: m.clone(), second: Some(img), distance: render(&d) })
        }),
    }
}

fn scan_members(
    family: &ConstructionFamily,
    property: &Property,
    budget: usize,
    bad: impl Fn(&RWord) -> Option<Counterexample> + Sync,
) -> Result<VerifyReport> {
    let size = family.len();
    if size > budget as u128 {
        return Err(Error::BudgetExceeded { needed: size.min(usize::MAX as u128) as usize, budget });
    }
    let idx: Vec<u128> = (0..size).collect();
    let found = par::map(&idx, |&i| bad(&family.member(i)));
    Ok(report(property.clone(), size, size, false, found.into_iter().flatten().next()))
}

/// Both separation statements for `E2`: at length `n` and at `n + l`.
pub fn verify_e2_separation(family: &ConstructionFamily, budget: usize, seed: u64) -> Result<(VerifyReport, VerifyReport)> {
    let (Some(eps), Some(delta)) = (family.epsilon, family.delta) else {
        return Err(Error::InvalidConfig("E2 family needs ε and δ".into()));
    };
    let l = tail_length(&eps);
    let short = verify_family(family, &Property::Separated { n: family.n, delta }, &[], budget, seed)?;
    let long = verify_family(family, &Property::Separated { n: family.n + l, delta }, &[], budget, seed)?;
    Ok((short, long))
}

/// `ln([v] + 1)`, the per-step growth of the `E2`/`E3` counts.
pub fn log_floor_plus_one(v: &Q) -> f64 {
    (floor_plus_one(*v) as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pressure::{growth_rate, RateMethod};
    use crate::rational::q;
    use proptest::prelude::*;

    fn base(len: usize) -> RWord {
        RWord { prefix: (0..len).map(|i| q((i % 3) as i64, 6)).collect(), tail: q(1, 4) }
    }

    #[test]
    fn tail_length_matches_floor_formula() {
        assert_eq!(tail_length(&q(1, 2)), 3);
        assert_eq!(tail_length(&q(1, 4)), 4);
        assert_eq!(tail_length(&q(1, 8)), 5);
        assert_eq!(tail_length(&q(1, 3)), 3);
        assert_eq!(tail_length(&q(9, 10)), 2);
    }

    #[test]
    fn distance_is_exact_on_eventually_constant_words() {
        let a = RWord { prefix: vec![q(1, 1)], tail: q(0, 1) };
        let b = RWord::constant(q(0, 1));
        assert_eq!(distance(&a, &b), R::from_integer(1));
        let c = RWord::constant(q(1, 1));
        assert_eq!(distance(&b, &c), R::from_integer(2));
        assert_eq!(bowen_distance(&a, &b, 2), R::from_integer(1));
        assert_eq!(bowen_distance(&a.shift(1), &b, 3), R::zero());
    }

    #[test]
    fn e1_counts_and_spans() {
        let fam = construct_e1(2, q(1, 2)).unwrap();
        assert_eq!(fam.cardinality_formula_value, 16807);
        assert_eq!(fam.len(), 16807);
        let cloud = random_words(2000, 12, 3 * 1024, 5);
        let r = verify_family(&fam, &Property::Spanning { n: 2, epsilon: q(1, 2) }, &cloud, 1_000_000, 0).unwrap();
        assert!(r.pass && !r.vacuous, "{r:?}");
        let smaller = construct_e1(2, q(1, 4)).unwrap();
        assert!(smaller.len() >= fam.len());
    }

    #[test]
    fn e1_enumeration_matches_formula_when_small() {
        let fam = construct_e1(1, q(9, 10)).unwrap();
        assert_eq!(fam.members().count() as u128, fam.cardinality_formula_value);
        let distinct: std::collections::HashSet<RWord> = fam.members().collect();
        assert_eq!(distinct.len() as u128, fam.len());
    }

    #[test]
    fn empty_cloud_spans_vacuously() {
        let fam = construct_e1(1, q(1, 2)).unwrap();
        let r = verify_family(&fam, &Property::Spanning { n: 1, epsilon: q(1, 2) }, &[], 10, 0).unwrap();
        assert!(r.pass && r.vacuous);
    }

    #[test]
    fn e2_separates_inside_the_ball() {
        let x = base(6);
        let fam = construct_e2(&x, 3, q(1, 2), q(1, 24)).unwrap();
        assert_eq!(fam.len(), 125);
        let (short, long) = verify_e2_separation(&fam, 1_000_000, 0).unwrap();
        assert!(short.pass && long.pass && !short.sampled);
        let ball = Property::InBall { center: x.clone(), n: 3, epsilon: q(1, 2) };
        assert!(verify_family(&fam, &ball, &[], 1_000_000, 0).unwrap().pass);
        let degenerate = construct_e2(&x, 3, q(1, 2), q(1, 5)).unwrap();
        assert_eq!(degenerate.len(), 1);
    }

    #[test]
    fn e2_rejects_base_points_above_half() {
        let x = RWord { prefix: vec![q(3, 4)], tail: q(0, 1) };
        assert!(matches!(construct_e2(&x, 2, q(1, 4), q(1, 24)), Err(Error::BasePointOutOfRange(_))));
    }

    #[test]
    fn e3_members_are_separated_preimages() {
        let x = base(4);
        let fam = construct_e3(&x, 2, q(1, 2)).unwrap();
        assert_eq!(fam.len(), 9);
        assert!(verify_family(&fam, &Property::Preimage { target: x.clone(), n: 2 }, &[], 100, 0).unwrap().pass);
        assert!(verify_family(&fam, &Property::Separated { n: 2, delta: q(1, 2) }, &[], 100, 0).unwrap().pass);
    }

    #[test]
    fn corrupted_family_fails_with_counterexample() {
        let x = base(4);
        let fam = construct_e3(&x, 2, q(1, 2)).unwrap();
        let mut w = fam.member(4);
        w.prefix[0] += q(1, 8);
        let bad = fam.with_override(3, w);
        let r = verify_family(&bad, &Property::Separated { n: 2, delta: q(1, 2) }, &[], 100, 0).unwrap();
        assert!(!r.pass);
        assert!(r.counterexample.is_some());
        let sampled = verify_family(&bad, &Property::Separated { n: 2, delta: q(1, 2) }, &[], 10, 0).unwrap();
        assert!(sampled.sampled && !sampled.pass);
    }

    #[test]
    fn cardinality_growth_rates_are_exact() {
        let x = base(10);
        let series: Vec<(usize, f64)> = (1..=6)
            .map(|n| (n, construct_e2(&x, n, q(1, 2), q(1, 24)).unwrap().len() as f64))
            .collect();
        let r = growth_rate(&series, RateMethod::EndpointSlope, None).unwrap();
        assert!((r.value - log_floor_plus_one(&(q(1, 2) / (q(3, 1) * q(1, 24))))).abs() < 1e-9);
        let series: Vec<(usize, f64)> = (1..=6).map(|n| (n, construct_e3(&x, n, q(1, 3)).unwrap().len() as f64)).collect();
        let r = growth_rate(&series, RateMethod::EndpointSlope, None).unwrap();
        assert!((r.value - 4f64.ln()).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn nearest_member_is_optimal(seed in 0u64..1000, n in 1usize..3) {
            let fam = construct_e1(n, q(9, 10)).unwrap();
            let cloud = random_words(4, 6, 7, seed);
            for y in &cloud {
                let best = fam.members().map(|m| bowen_distance(y, &m, n)).min().unwrap();
                prop_assert_eq!(bowen_distance(y, &fam.member(fam.nearest(y)), n), best);
            }
        }

        #[test]
        fn e1_cardinality_nonincreasing_in_eps(n in 1usize..4, a in 1i64..20, b in 1i64..20) {
            let (lo, hi) = (a.min(b), a.max(b));
            let small = construct_e1(n, q(lo, 21)).unwrap();
            let large = construct_e1(n, q(hi, 21)).unwrap();
            prop_assert!(large.cardinality_formula_value <= small.cardinality_formula_value);
            prop_assert_eq!(large.len(), large.cardinality_formula_value);
        }
    }
}
