//! Spanning and separated numbers, weighted spanning/separated sums and
//! minimal subcover counts as exact oracles on small clouds and certified
//! one-sided bounds at scale.

mod open_cover;
pub mod oracle;
pub mod solver;
pub mod symbolic;

pub use open_cover::{cover_from_net, min_subcover_count, CoverElement, OpenCoverSpec, SubcoverBound};
pub use symbolic::{separated_box, spanning_grid, CenterGrid, ConstraintSet, ProductBox};

use serde::{Deserialize, Serialize};

use crate::bowen::{checked_cut, PairMatrix};
use crate::error::{Error, Result};
use crate::par;
use crate::rational::{to_f64, Q};
use crate::systems::{Cut, Point, Potential, SampleCloud, SystemSpec};
use solver::BitSet;

pub const DEFAULT_EXACT_LIMIT: usize = 14;
pub const DEFAULT_JOIN_LIMIT: usize = 4096;
pub const DEFAULT_BUDGET: usize = 1_000_000;
/// Hard ceiling of the bitmask solvers.
pub const MASK_CAPACITY: usize = 128;
/// Relative tolerance for comparing two weighted sums.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundType {
    Exact,
    Upper,
    Lower,
}

impl BoundType {
    pub fn name(&self) -> &'static str {
        match self {
            BoundType::Exact => "exact",
            BoundType::Upper => "upper",
            BoundType::Lower => "lower",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BruteForce,
    Greedy,
    Construction,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::BruteForce => "brute_force",
            Method::Greedy => "greedy",
            Method::Construction => "construction",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Greedy,
}

/// Size limits shared by every kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub exact_limit: usize,
    pub join_limit: usize,
    pub budget: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { exact_limit: DEFAULT_EXACT_LIMIT, join_limit: DEFAULT_JOIN_LIMIT, budget: DEFAULT_BUDGET }
    }
}

impl KernelConfig {
    fn check_exact(&self, size: usize) -> Result<()> {
        let limit = self.exact_limit.min(MASK_CAPACITY);
        if size > limit {
            return Err(Error::InstanceTooLarge { size, limit });
        }
        Ok(())
    }
}

/// A count or weighted sum with the direction in which it bounds the
/// quantity it estimates. Values are stored as natural logarithms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountBound {
    pub log_value: f64,
    pub bound_type: BoundType,
    pub method: Method,
    #[serde(skip)]
    pub witness: Option<Vec<Point>>,
    pub caveats: Vec<String>,
}

impl CountBound {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }

    pub fn with_caveat(mut self, c: impl Into<String>) -> Self {
        self.caveats.push(c.into());
        self
    }
}

/// `ln Σ eᵗ` over log-terms with compensated summation after factoring out
/// the largest term.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &t in terms {
        let x = (t - m).exp();
        let s = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - s) + x;
        } else {
            comp += (x - s) + sum;
        }
        sum = s;
    }
    m + (sum + comp).ln()
}

/// `a ≤ b` for two log-sums at relative tolerance [`SUM_TOLERANCE`].
pub fn log_le(a: f64, b: f64) -> bool {
    a <= b + SUM_TOLERANCE
}

/// Log weights rescaled so the largest is 1, for the linear-weight solvers.
pub(crate) fn linear_weights(logs: &[f64]) -> (Vec<f64>, f64) {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w = logs.iter().map(|l| (l - m).exp().max(f64::MIN_POSITIVE)).collect();
    (w, m)
}

/// Log-weights `S_n f(x) · ln(1/ε)` of the given centers.
pub fn log_weights(sys: &SystemSpec, points: &[Point], n: usize, eps: &Q, f: &Potential) -> Result<Vec<f64>> {
    if f.is_zero() {
        return Ok(vec![0.0; points.len()]);
    }
    let scale = -to_f64(eps).ln();
    par::try_map(points, |p| Ok(f.birkhoff_sum(sys, p, n)? * scale))
}

/// Open-ball masks of `centers` over `targets` at `d_n < ε`.
fn open_masks(sys: &SystemSpec, targets: &[Point], centers: &[Point], n: usize, cut: &Cut) -> Vec<BitSet> {
    par::map(centers, |c| {
        let mut m = BitSet::new(targets.len());
        for (i, t) in targets.iter().enumerate() {
            if cut.open(crate::bowen::window_distance_unchecked(sys, c, t, 0, n - 1)) {
                m.insert(i);
            }
        }
        m
    })
}

/// Conflict graph `d_n < ε` of a point list.
fn conflicts(matrix: &PairMatrix, cut: &Cut) -> Vec<BitSet> {
    let len = matrix.len();
    par::map_range(0..len, |i| {
        let mut m = BitSet::new(len);
        for j in 0..len {
            if i != j && cut.open(matrix.get(i, j)) {
                m.insert(j);
            }
        }
        m
    })
}

fn require_nonempty(points: &[Point]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidConfig("kernel needs a nonempty cloud".into()));
    }
    Ok(())
}

/// Greedy maximal `(n,ε)`-separated subset in cloud order, yielding
/// `s_n ≥ |F|` and, since a maximal separated set spans, `r_n ≤ |F|`.
pub fn greedy_maximal_separated(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    n: usize,
    eps: &Q,
) -> Result<(CountBound, CountBound)> {
    require_nonempty(&cloud.points)?;
    cloud.validate(sys)?;
    let cut = checked_cut(sys, n, eps)?;
    let matrix = PairMatrix::new(sys, &cloud.points, n)?;
    let mut chosen: Vec<usize> = Vec::new();
    for i in 0..cloud.len() {
        if chosen.iter().all(|&j| !cut.open(matrix.get(i, j))) {
            chosen.push(i);
        }
    }
    let witness: Vec<Point> = chosen.iter().map(|&i| cloud.points[i].clone()).collect();
    if !verify_separated(sys, &witness, n, eps)? || !verify_spanning(sys, &cloud.points, &witness, n, eps)? {
        return Err(Error::InvariantViolation("greedy separated set failed re-verification".into()));
    }
    let log = (chosen.len() as f64).ln();
    let lower = CountBound {
        log_value: log,
        bound_type: BoundType::Lower,
        method: Method::Greedy,
        witness: Some(witness.clone()),
        caveats: vec![],
    };
    let upper = CountBound {
        log_value: log,
        bound_type: BoundType::Upper,
        method: Method::Greedy,
        witness: Some(witness),
        caveats: vec!["relative spanning: centers in cloud".into()],
    };
    Ok((lower, upper))
}

/// Exact minimum number of open `(n,ε)`-Bowen balls centered at
/// `centers` (default: the cloud) covering the cloud.
pub fn exact_spanning_number(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    n: usize,
    eps: &Q,
    centers: Option<&[Point]>,
    cfg: &KernelConfig,
) -> Result<CountBound> {
    spanning_sum(sys, &cloud.points, centers.unwrap_or(&cloud.points), n, eps, &Potential::zero(), Mode::Exact, cfg)
}

/// Exact maximum cardinality of an `(n,ε)`-separated subset of the cloud.
pub fn exact_separated_number(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    n: usize,
    eps: &Q,
    cfg: &KernelConfig,
) -> Result<CountBound> {
    separated_sum(sys, &cloud.points, n, eps, &Potential::zero(), Mode::Exact, cfg)
}

/// `P_n(f, Z, ε) = inf Σ_{x∈E} (1/ε)^{S_n f(x)}` over spanning sets `E` drawn from the cloud.
pub fn min_weighted_spanning_sum(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    n: usize,
    eps: &Q,
    f: &Potential,
    mode: Mode,
    cfg: &KernelConfig,
) -> Result<CountBound> {
    spanning_sum(sys, &cloud.points, &cloud.points, n, eps, f, mode, cfg)
}

/// `Q_n(f, Z, ε) = sup Σ_{x∈E} (1/ε)^{S_n f(x)}` over separated subsets `E` of the cloud.
pub fn max_weighted_separated_sum(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    n: usize,
    eps: &Q,
    f: &Potential,
    mode: Mode,
    cfg: &KernelConfig,
) -> Result<CountBound> {
    separated_sum(sys, &cloud.points, n, eps, f, mode, cfg)
}

/// Weighted spanning sum of `targets` with candidate centers `centers`.
#[allow(clippy::too_many_arguments)]
pub fn spanning_sum(
    sys: &SystemSpec,
    targets: &[Point],
    centers: &[Point],
    n: usize,
    eps: &Q,
    f: &Potential,
    mode: Mode,
    cfg: &KernelConfig,
) -> Result<CountBound> {
    require_nonempty(targets)?;
    f.validate(sys)?;
    targets.iter().chain(centers).try_for_each(|p| sys.validate_point(p))?;
    let cut = checked_cut(sys, n, eps)?;
    if mode == Mode::Exact {
        cfg.check_exact(targets.len())?;
    }
    let masks = open_masks(sys, targets, centers, n, &cut);
    let logs = log_weights(sys, centers, n, eps, f)?;
    let (w, _) = linear_weights(&logs);
    let chosen = match mode {
        Mode::Exact => {
            let m128: Vec<u128> = masks.iter().map(BitSet::to_u128).collect();
            let universe = BitSet::full(targets.len()).to_u128();
            exact_min_cover(universe, &m128, &w)
        }
        Mode::Greedy => solver::greedy_cover(&BitSet::full(targets.len()), &masks, &w),
    }
    .ok_or_else(|| Error::CoverIncomplete("candidate centers do not cover every target".into()))?;
    let witness: Vec<Point> = chosen.iter().map(|&i| centers[i].clone()).collect();
    if !verify_spanning(sys, targets, &witness, n, eps)? {
        return Err(Error::InvariantViolation("spanning witness failed re-verification".into()));
    }
    let log_value = log_sum_exp(&chosen.iter().map(|&i| logs[i]).collect::<Vec<_>>());
    let (bound_type, method) = match mode {
        Mode::Exact => (BoundType::Exact, Method::BruteForce),
        Mode::Greedy => (BoundType::Upper, Method::Greedy),
    };
    Ok(CountBound {
        log_value,
        bound_type,
        method,
        witness: Some(witness),
        caveats: vec!["relative spanning: centers restricted to a finite candidate set".into()],
    })
}

fn exact_min_cover(universe: u128, masks: &[u128], w: &[f64]) -> Option<Vec<usize>> {
    solver::exact_min_cover(universe, masks, w).map(|(s, _)| s)
}

/// Weighted separated sum over subsets of `points`.
pub fn separated_sum(
    sys: &SystemSpec,
    points: &[Point],
    n: usize,
    eps: &Q,
    f: &Potential,
    mode: Mode,
    cfg: &KernelConfig,
) -> Result<CountBound> {
    require_nonempty(points)?;
    f.validate(sys)?;
    let cut = checked_cut(sys, n, eps)?;
    if mode == Mode::Exact {
        cfg.check_exact(points.len())?;
    }
    let matrix = PairMatrix::new(sys, points, n)?;
    let conf = conflicts(&matrix, &cut);
    let logs = log_weights(sys, points, n, eps, f)?;
    let (w, _) = linear_weights(&logs);
    let chosen = match mode {
        Mode::Exact => {
            let adj: Vec<u128> = conf.iter().map(BitSet::to_u128).collect();
            solver::exact_max_independent(&adj, &w).0
        }
        Mode::Greedy => {
            let order: Vec<usize> =
                if f.is_zero() { (0..points.len()).collect() } else { solver::descending_weight_order(&w) };
            solver::greedy_independent(&conf, &order)
        }
    };
    let witness: Vec<Point> = chosen.iter().map(|&i| points[i].clone()).collect();
    if !verify_separated(sys, &witness, n, eps)? {
        return Err(Error::InvariantViolation("separated witness failed re-verification".into()));
    }
    let (bound_type, method) = match mode {
        Mode::Exact => (BoundType::Exact, Method::BruteForce),
        Mode::Greedy => (BoundType::Lower, Method::Greedy),
    };
    Ok(CountBound {
        log_value: log_sum_exp(&chosen.iter().map(|&i| logs[i]).collect::<Vec<_>>()),
        bound_type,
        method,
        witness: Some(witness),
        caveats: vec![],
    })
}

/// Every target lies in an open `(n,ε)`-ball around some center.
pub fn verify_spanning(sys: &SystemSpec, targets: &[Point], centers: &[Point], n: usize, eps: &Q) -> Result<bool> {
    let cut = checked_cut(sys, n, eps)?;
    let ok = par::map(targets, |t| {
        centers.iter().any(|c| cut.open(crate::bowen::window_distance_unchecked(sys, c, t, 0, n - 1)))
    });
    Ok(ok.into_iter().all(|b| b))
}

/// All pairs of `points` are at `d_n ≥ ε`.
pub fn verify_separated(sys: &SystemSpec, points: &[Point], n: usize, eps: &Q) -> Result<bool> {
    let cut = checked_cut(sys, n, eps)?;
    let ok = par::map_range(0..points.len(), |i| {
        (i + 1..points.len())
            .all(|j| !cut.open(crate::bowen::window_distance_unchecked(sys, &points[i], &points[j], 0, n - 1)))
    });
    Ok(ok.into_iter().all(|b| b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::systems::{sample_cloud, FiniteSystem, Scheme};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn three_point() -> SystemSpec {
        SystemSpec::Finite(
            FiniteSystem::new(
                vec![
                    vec![q(0, 1), q(1, 5), q(7, 10)],
                    vec![q(1, 5), q(0, 1), q(1, 2)],
                    vec![q(7, 10), q(1, 2), q(0, 1)],
                ],
                vec![1, 2, 2],
            )
            .unwrap(),
        )
    }

    fn all_points(sys: &SystemSpec) -> SampleCloud {
        let n = sys.as_finite().unwrap().point_count();
        sample_cloud(sys, Scheme::Grid, n, 0).unwrap()
    }

    fn random_finite(seed: u64, points: usize) -> SystemSpec {
        SystemSpec::Finite(FiniteSystem::random(&mut ChaCha8Rng::seed_from_u64(seed), points))
    }

    /// Smallest covering subset by increasing size.
    fn oracle_spanning(sys: &SystemSpec, pts: &[Point], n: usize, eps: &Q) -> usize {
        let cut = sys.cut(eps);
        let k = pts.len();
        let covers = |c: usize, t: usize| {
            cut.open(crate::bowen::bowen_distance(sys, &pts[c], &pts[t], n).unwrap())
        };
        for size in 1..=k {
            for sub in 0u32..(1 << k) {
                if sub.count_ones() as usize == size
                    && (0..k).all(|t| (0..k).any(|c| sub >> c & 1 == 1 && covers(c, t)))
                {
                    return size;
                }
            }
        }
        unreachable!()
    }

    fn oracle_separated(sys: &SystemSpec, pts: &[Point], n: usize, eps: &Q) -> usize {
        let cut = sys.cut(eps);
        let k = pts.len();
        (0u32..(1 << k))
            .filter(|sub| {
                (0..k).all(|i| {
                    (i + 1..k).all(|j| {
                        sub >> i & 1 == 0
                            || sub >> j & 1 == 0
                            || !cut.open(crate::bowen::bowen_distance(sys, &pts[i], &pts[j], n).unwrap())
                    })
                })
            })
            .map(|s| s.count_ones() as usize)
            .max()
            .unwrap()
    }

    #[test]
    fn greedy_trace_on_three_points() {
        let sys = three_point();
        let cloud = all_points(&sys);
        let (lo, hi) = greedy_maximal_separated(&sys, &cloud, 1, &q(2, 5)).unwrap();
        assert_eq!(lo.witness.as_ref().unwrap(), &vec![Point::Index(0), Point::Index(2)]);
        assert!((lo.value() - 2.0).abs() < 1e-12);
        assert_eq!(hi.bound_type, BoundType::Upper);
    }

    #[test]
    fn trivial_radius_cases() {
        let sys = three_point();
        let cloud = all_points(&sys);
        let cfg = KernelConfig::default();
        let big = q(2, 1);
        assert!((exact_spanning_number(&sys, &cloud, 3, &big, None, &cfg).unwrap().value() - 1.0).abs() < 1e-12);
        assert!((exact_separated_number(&sys, &cloud, 3, &big, &cfg).unwrap().value() - 1.0).abs() < 1e-12);
        let small = q(1, 10);
        assert!((exact_separated_number(&sys, &cloud, 1, &small, &cfg).unwrap().value() - 3.0).abs() < 1e-12);
        let single = cloud.select(&[1], "p1");
        let (lo, _) = greedy_maximal_separated(&sys, &single, 2, &small).unwrap();
        assert!((lo.value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_distant_fixed_points() {
        let sys = SystemSpec::Finite(
            FiniteSystem::new(vec![vec![q(0, 1), q(1, 1)], vec![q(1, 1), q(0, 1)]], vec![0, 1]).unwrap(),
        );
        let cloud = all_points(&sys);
        for n in 1..5 {
            let b = exact_spanning_number(&sys, &cloud, n, &q(1, 2), None, &KernelConfig::default()).unwrap();
            assert!((b.value() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_limit_enforced() {
        let sys = random_finite(1, 16);
        let cloud = all_points(&sys);
        let err = exact_separated_number(&sys, &cloud, 1, &q(1, 4), &KernelConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InstanceTooLarge { .. }));
        let cfg = KernelConfig { exact_limit: 16, ..Default::default() };
        assert!(exact_separated_number(&sys, &cloud, 1, &q(1, 4), &cfg).is_ok());
    }

    #[test]
    fn seed_seven_matches_exhaustive_oracle() {
        let sys = random_finite(7, 10);
        let cloud = all_points(&sys);
        let cfg = KernelConfig::default();
        for n in 1..=3 {
            for eps in [q(1, 5), q(2, 5), q(3, 5)] {
                let r = exact_spanning_number(&sys, &cloud, n, &eps, None, &cfg).unwrap();
                let s = exact_separated_number(&sys, &cloud, n, &eps, &cfg).unwrap();
                assert_eq!(r.value().round() as usize, oracle_spanning(&sys, &cloud.points, n, &eps));
                assert_eq!(s.value().round() as usize, oracle_separated(&sys, &cloud.points, n, &eps));
            }
        }
    }

    #[test]
    fn zero_potential_reduces_to_counts() {
        let sys = random_finite(3, 8);
        let cloud = all_points(&sys);
        let cfg = KernelConfig::default();
        let f = Potential::zero();
        let eps = q(3, 10);
        let p = min_weighted_spanning_sum(&sys, &cloud, 2, &eps, &f, Mode::Exact, &cfg).unwrap();
        let r = exact_spanning_number(&sys, &cloud, 2, &eps, None, &cfg).unwrap();
        assert!((p.log_value - r.log_value).abs() < 1e-12);
        let qn = max_weighted_separated_sum(&sys, &cloud, 2, &eps, &f, Mode::Exact, &cfg).unwrap();
        let s = exact_separated_number(&sys, &cloud, 2, &eps, &cfg).unwrap();
        assert!((qn.log_value - s.log_value).abs() < 1e-12);
    }

    #[test]
    fn singleton_weight() {
        let sys = random_finite(3, 8);
        let cloud = all_points(&sys).select(&[4], "x");
        let f = Potential::Table((0..8).map(|i| q(i, 3)).collect());
        let eps = q(1, 4);
        let expected = f.birkhoff_sum(&sys, &cloud.points[0], 3).unwrap() * 4f64.ln();
        let cfg = KernelConfig::default();
        let p = min_weighted_spanning_sum(&sys, &cloud, 3, &eps, &f, Mode::Exact, &cfg).unwrap();
        let qn = max_weighted_separated_sum(&sys, &cloud, 3, &eps, &f, Mode::Exact, &cfg).unwrap();
        assert!((p.log_value - expected).abs() < 1e-12);
        assert!((qn.log_value - expected).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((log_sum_exp(&[0.0; 4]) - 4f64.ln()).abs() < 1e-15);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sandwich_and_greedy_brackets(seed in 0u64..10_000, size in 2usize..10, n in 1usize..4, k in 1i64..6) {
            let sys = random_finite(seed, size);
            let cloud = all_points(&sys);
            let cfg = KernelConfig::default();
            let eps = q(k, 10);
            let half = eps / 2;
            let r = exact_spanning_number(&sys, &cloud, n, &eps, None, &cfg).unwrap().value();
            let s = exact_separated_number(&sys, &cloud, n, &eps, &cfg).unwrap().value();
            let r_half = exact_spanning_number(&sys, &cloud, n, &half, None, &cfg).unwrap().value();
            prop_assert!(r <= s + 1e-9 && s <= r_half + 1e-9);
            let (glo, ghi) = greedy_maximal_separated(&sys, &cloud, n, &eps).unwrap();
            prop_assert!(glo.value() <= s + 1e-9 && r <= ghi.value() + 1e-9);
            let wider = exact_spanning_number(&sys, &cloud, n, &(eps + q(1, 10)), None, &cfg).unwrap().value();
            prop_assert!(wider <= r + 1e-9);
        }

        #[test]
        fn weighted_modes_bracket_exact(seed in 0u64..10_000, size in 2usize..9, n in 1usize..4) {
            let sys = random_finite(seed, size);
            let cloud = all_points(&sys);
            let cfg = KernelConfig::default();
            let f = Potential::Table((0..size as i64).map(|i| q((i * 7) % 5 - 2, 3)).collect());
            let eps = q(3, 10);
            let pe = min_weighted_spanning_sum(&sys, &cloud, n, &eps, &f, Mode::Exact, &cfg).unwrap();
            let pg = min_weighted_spanning_sum(&sys, &cloud, n, &eps, &f, Mode::Greedy, &cfg).unwrap();
            let qe = max_weighted_separated_sum(&sys, &cloud, n, &eps, &f, Mode::Exact, &cfg).unwrap();
            let qg = max_weighted_separated_sum(&sys, &cloud, n, &eps, &f, Mode::Greedy, &cfg).unwrap();
            prop_assert!(log_le(pe.log_value, pg.log_value));
            prop_assert!(log_le(qg.log_value, qe.log_value));
            prop_assert!(log_le(pe.log_value, qe.log_value));
        }
    }
}
