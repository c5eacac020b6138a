//! Block stable sets, truncated stable sets, tail Bowen balls and preimage
//! families, realized on sample clouds and, for shifts, as constraint sets.

use serde::Serialize;

use crate::bowen::{ball_members, block_stable_contains, BowenQuery};
use crate::covering::{separated_box, spanning_grid, spanning_sum, separated_sum, ConstraintSet, CountBound, KernelConfig, Mode};
use crate::error::{Error, Result};
use crate::par;
use crate::rational::{serde_q, Q};
use crate::systems::{Point, Potential, SampleCloud, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    Block { m: usize, n: usize },
    Truncated { depth: usize },
    PreimageOfStable { n: usize, depth: usize },
    TailBall { n: usize },
    PreimageOfBall { n: usize },
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Block { .. } => "block",
            Variant::Truncated { .. } => "truncated",
            Variant::PreimageOfStable { .. } => "preimage_of_stable",
            Variant::TailBall { .. } => "tail_ball",
            Variant::PreimageOfBall { .. } => "preimage_of_ball",
        }
    }

    pub fn constraint(&self, x: &[u16], eps: Q) -> ConstraintSet {
        match *self {
            Variant::Block { m, n } => ConstraintSet::block(x, eps, m, n),
            Variant::Truncated { depth } => ConstraintSet::block(x, eps, 0, depth - 1),
            Variant::PreimageOfStable { n, depth } => ConstraintSet::preimage_of_block(x, eps, n, depth),
            Variant::TailBall { n } => ConstraintSet::tail_ball(x, eps, n),
            Variant::PreimageOfBall { n } => ConstraintSet::preimage_of_ball(x, eps, n),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Variant::Block { m, n } if m > n => Err(Error::InvalidConfig(format!("block [{m},{n}] has m > n"))),
            Variant::Truncated { depth: 0 } | Variant::PreimageOfStable { depth: 0, .. } => {
                Err(Error::InvalidConfig("truncation depth must be positive".into()))
            }
            Variant::TailBall { n: 0 } => Err(Error::InvalidConfig("Bowen length must be positive".into())),
            _ => Ok(()),
        }
    }
}

/// A realized special set around `base_point`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StableFamily {
    pub base_point: Point,
    #[serde(with = "serde_q")]
    pub epsilon: Q,
    pub variant: Variant,
    #[serde(skip)]
    pub members: SampleCloud,
    pub symbolic: Option<ConstraintSet>,
}

impl StableFamily {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Fails with `InvariantViolation` naming the first member outside the set.
    pub fn verify(&self, sys: &SystemSpec) -> Result<()> {
        let ok = par::try_map(&self.members.points, |y| contains(sys, &self.base_point, &self.epsilon, self.variant, y))?;
        match ok.iter().position(|b| !b) {
            None => Ok(()),
            Some(i) => Err(Error::InvariantViolation(format!(
                "{:?} is not in the {} family of {:?}",
                self.members.points[i],
                self.variant.name(),
                self.base_point
            ))),
        }
    }
}

/// Defining predicate of `variant` around `x`.
pub fn contains(sys: &SystemSpec, x: &Point, eps: &Q, variant: Variant, y: &Point) -> Result<bool> {
    variant.validate()?;
    match variant {
        Variant::Block { m, n } => block_stable_contains(sys, x, y, eps, m, n),
        Variant::Truncated { depth } => block_stable_contains(sys, x, y, eps, 0, depth - 1),
        Variant::TailBall { n } => {
            let d = crate::bowen::bowen_distance(sys, x, y, n)?;
            sys.check_horizon(n, eps)?;
            Ok(sys.cut(eps).open(d))
        }
        Variant::PreimageOfBall { n } => {
            sys.check_horizon(1, eps)?;
            let d = sys.distance(&sys.apply(y, n)?, x)?;
            Ok(sys.cut(eps).open(d))
        }
        Variant::PreimageOfStable { n, depth } => block_stable_contains(sys, x, &sys.apply(y, n)?, eps, 0, depth - 1),
    }
}

fn symbolic(sys: &SystemSpec, x: &Point, eps: &Q, variant: Variant) -> Option<ConstraintSet> {
    match (sys, x) {
        (SystemSpec::Shift(_), Point::Word(w)) => Some(variant.constraint(w, *eps)),
        _ => None,
    }
}

fn family(sys: &SystemSpec, x: &Point, eps: &Q, variant: Variant, members: SampleCloud) -> StableFamily {
    StableFamily { base_point: x.clone(), epsilon: *eps, variant, symbolic: symbolic(sys, x, eps, variant), members }
}

fn filter(sys: &SystemSpec, cloud: &SampleCloud, x: &Point, eps: &Q, variant: Variant, query: BowenQuery) -> Result<StableFamily> {
    variant.validate()?;
    let mut members = ball_members(sys, cloud, x, &query)?;
    members.subset_label = format!("{}:{}", variant.name(), cloud.subset_label);
    Ok(family(sys, x, eps, variant, members))
}

/// Cloud points of `W_{ε,[m,n]}(x)`.
pub fn block_stable_sample(sys: &SystemSpec, cloud: &SampleCloud, x: &Point, eps: &Q, m: usize, n: usize) -> Result<StableFamily> {
    filter(sys, cloud, x, eps, Variant::Block { m, n }, BowenQuery::block(m, n, *eps))
}

/// Cloud points of the stable set of `x` truncated at `depth` iterates.
pub fn truncated_stable_sample(sys: &SystemSpec, cloud: &SampleCloud, x: &Point, eps: &Q, depth: usize) -> Result<StableFamily> {
    if depth == 0 {
        return Err(Error::InvalidConfig("truncation depth must be positive".into()));
    }
    filter(sys, cloud, x, eps, Variant::Truncated { depth }, BowenQuery::block(0, depth - 1, *eps))
}

/// Cloud points of the open Bowen ball `B_n(x, ε)`.
pub fn tail_ball_sample(sys: &SystemSpec, cloud: &SampleCloud, x: &Point, eps: &Q, n: usize) -> Result<StableFamily> {
    filter(sys, cloud, x, eps, Variant::TailBall { n }, BowenQuery::open(n, *eps))
}

fn pull_back(sys: &SystemSpec, base: &SampleCloud, x: &Point, n: usize, budget: usize) -> Result<Vec<Point>> {
    if !sys.supports_preimages() {
        return Err(Error::PreimagesUnsupported(sys.label()));
    }
    let mut seeds: Vec<Point> = base.points.clone();
    if !seeds.contains(x) {
        seeds.insert(0, x.clone());
    }
    let mut out = Vec::new();
    for p in &seeds {
        let left = budget.saturating_sub(out.len());
        match sys.iterated_preimages(p, n, left) {
            Ok(pre) => out.extend(pre),
            Err(Error::BudgetExceeded { needed, .. }) => {
                return Err(Error::BudgetExceeded { needed: out.len() + needed, budget })
            }
            Err(e) => return Err(e),
        }
        if out.len() > budget {
            return Err(Error::BudgetExceeded { needed: out.len(), budget });
        }
    }
    Ok(out)
}

/// `T^{-n}` of the truncated stable set of `x`, seeded by `x` and the cloud
/// points of that set.
pub fn preimage_stable_sample(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    x: &Point,
    eps: &Q,
    n: usize,
    depth: usize,
    budget: usize,
) -> Result<StableFamily> {
    let base = truncated_stable_sample(sys, cloud, x, eps, depth)?;
    let pts = pull_back(sys, &base.members, x, n, budget)?;
    let members = SampleCloud::explicit(sys, pts, format!("preimage_of_stable:{}", cloud.subset_label));
    Ok(family(sys, x, eps, Variant::PreimageOfStable { n, depth }, members))
}

/// `T^{-n} B(x, ε)`, seeded by `x` and the cloud points of the open ball.
pub fn preimage_neighborhood_sample(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    x: &Point,
    eps: &Q,
    n: usize,
    budget: usize,
) -> Result<StableFamily> {
    let base = filter(sys, cloud, x, eps, Variant::PreimageOfBall { n: 0 }, BowenQuery::open(1, *eps))?;
    let pts = pull_back(sys, &base.members, x, n, budget)?;
    let members = SampleCloud::explicit(sys, pts, format!("preimage_of_ball:{}", cloud.subset_label));
    Ok(family(sys, x, eps, Variant::PreimageOfBall { n }, members))
}

pub fn realize(sys: &SystemSpec, cloud: &SampleCloud, x: &Point, eps: &Q, variant: Variant, budget: usize) -> Result<StableFamily> {
    match variant {
        Variant::Block { m, n } => block_stable_sample(sys, cloud, x, eps, m, n),
        Variant::Truncated { depth } => truncated_stable_sample(sys, cloud, x, eps, depth),
        Variant::TailBall { n } => tail_ball_sample(sys, cloud, x, eps, n),
        Variant::PreimageOfStable { n, depth } => preimage_stable_sample(sys, cloud, x, eps, n, depth, budget),
        Variant::PreimageOfBall { n } => preimage_neighborhood_sample(sys, cloud, x, eps, n, budget),
    }
}

/// For shifts, compares the constraint description with pointwise
/// membership: on filtered variants, over every point of `cloud`; on
/// preimage variants, over the family members. Returns the number of
/// disagreements.
pub fn symbolic_disagreements(sys: &SystemSpec, cloud: &SampleCloud, fam: &StableFamily) -> Result<usize> {
    let (Some(s), Some(set)) = (sys.as_shift(), fam.symbolic.as_ref()) else {
        return Err(Error::Unsupported("constraint descriptions exist only on shifts".into()));
    };
    let pts = match fam.variant {
        Variant::PreimageOfStable { .. } | Variant::PreimageOfBall { .. } => &fam.members.points,
        _ => &cloud.points,
    };
    let bad = par::try_map(pts, |y| {
        let w = y.as_word().ok_or_else(|| Error::InvalidPoint(format!("{y:?}")))?;
        Ok::<_, Error>(set.contains(s, w) != contains(sys, &fam.base_point, &fam.epsilon, fam.variant, y)?)
    })?;
    Ok(bad.into_iter().filter(|b| *b).count())
}

/// Families whose growth in `n` defines the dispersion quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dispersion {
    TailBall,
    PreimageOfBall,
    PreimageOfStable { depth: usize },
}

impl Dispersion {
    pub fn name(&self) -> &'static str {
        self.variant(1).name()
    }

    pub fn variant(&self, n: usize) -> Variant {
        match *self {
            Dispersion::TailBall => Variant::TailBall { n },
            Dispersion::PreimageOfBall => Variant::PreimageOfBall { n },
            Dispersion::PreimageOfStable { depth } => Variant::PreimageOfStable { n, depth },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Realize each family on the cloud and run the cloud kernels on it.
    Cloud(Mode),
    /// Product-box bounds on the constraint set; shifts with `f = 0` only.
    Construction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionRow {
    pub n: usize,
    pub family_size: Option<usize>,
    pub spanning: CountBound,
    pub separated: CountBound,
}

/// `(n, δ)` spanning and separated bounds of the `kind` family of `x` for
/// every `n` in `window`.
#[allow(clippy::too_many_arguments)]
pub fn dispersion_series(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    x: &Point,
    eps: &Q,
    delta: &Q,
    window: (usize, usize),
    kind: Dispersion,
    f: &Potential,
    engine: Engine,
    cfg: &KernelConfig,
) -> Result<Vec<DispersionRow>> {
    if window.0 == 0 || window.0 > window.1 {
        return Err(Error::WindowTooSmall(format!("window [{}, {}]", window.0, window.1)));
    }
    sys.validate_point(x)?;
    let ns: Vec<usize> = (window.0..=window.1).collect();
    match engine {
        Engine::Construction => {
            let (Some(s), Some(w)) = (sys.as_shift(), x.as_word()) else {
                return Err(Error::Unsupported("construction bounds need a shift".into()));
            };
            if !f.is_zero() {
                return Err(Error::Unsupported("construction bounds need f = 0".into()));
            }
            par::try_map(&ns, |&n| {
                let set = kind.variant(n).constraint(w, *eps);
                Ok(DispersionRow {
                    n,
                    family_size: None,
                    spanning: spanning_grid(s, &set, n, delta)?.bound(),
                    separated: separated_box(s, &set, n, delta)?.bound(),
                })
            })
        }
        Engine::Cloud(mode) => ns
            .iter()
            .map(|&n| {
                let fam = realize(sys, cloud, x, eps, kind.variant(n), cfg.budget)?;
                if fam.is_empty() {
                    return Err(Error::EmptyNeighborhood(format!("{} family at n = {n}", kind.name())));
                }
                let pts = &fam.members.points;
                Ok(DispersionRow {
                    n,
                    family_size: Some(pts.len()),
                    spanning: spanning_sum(sys, pts, pts, n, delta, f, mode, cfg)?,
                    separated: separated_sum(sys, pts, n, delta, f, mode, cfg)?,
                })
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::systems::{sample_cloud, FiniteSystem, Scheme, ShiftSystem};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shift(k: usize, h: usize) -> SystemSpec {
        let levels = (0..k).map(|i| q(i as i64, (k - 1).max(1) as i64)).collect();
        SystemSpec::Shift(ShiftSystem::symbolic(levels, h).unwrap())
    }

    fn word(sys: &SystemSpec, prefix: &[u16]) -> Point {
        let h = sys.as_shift().unwrap().horizon();
        let mut w = prefix.to_vec();
        w.resize(h, 0);
        Point::Word(w)
    }

    #[test]
    fn large_radius_keeps_whole_cloud() {
        let sys = SystemSpec::Shift(ShiftSystem::grid(4, 10).unwrap());
        let cloud = sample_cloud(&sys, Scheme::UniformRandom, 200, 3).unwrap();
        let x = cloud.points[5].clone();
        let fam = block_stable_sample(&sys, &cloud, &x, &q(3, 1), 0, 2).unwrap();
        assert_eq!(fam.len(), 200);
        let small = block_stable_sample(&sys, &cloud, &x, &q(1, 8), 0, 2).unwrap();
        assert!(small.members.points.contains(&x));
        small.verify(&sys).unwrap();
    }

    #[test]
    fn symbolic_matches_filter_on_two_levels() {
        let sys = SystemSpec::Shift(ShiftSystem::grid(2, 12).unwrap());
        let cloud = sample_cloud(&sys, Scheme::UniformRandom, 1000, 11).unwrap();
        let x = word(&sys, &[]);
        for (m, n) in [(0, 0), (0, 2), (1, 3)] {
            for eps in [q(1, 2), q(3, 4), q(1, 4)] {
                let fam = block_stable_sample(&sys, &cloud, &x, &eps, m, n).unwrap();
                assert_eq!(symbolic_disagreements(&sys, &cloud, &fam).unwrap(), 0);
            }
        }
        let fam = block_stable_sample(&sys, &cloud, &x, &q(1, 2), 0, 0).unwrap();
        assert!(fam.members.points.iter().all(|p| p.as_word().unwrap()[0] == 0));
    }

    #[test]
    fn truncation_nests_and_starts_at_closed_ball() {
        let sys = SystemSpec::Shift(ShiftSystem::grid(4, 14).unwrap());
        let cloud = sample_cloud(&sys, Scheme::UniformRandom, 600, 2).unwrap();
        let x = cloud.points[0].clone();
        let eps = q(1, 2);
        let one = truncated_stable_sample(&sys, &cloud, &x, &eps, 1).unwrap();
        let ball = ball_members(&sys, &cloud, &x, &BowenQuery::closed(1, eps)).unwrap();
        assert_eq!(one.members.points, ball.points);
        let mut prev = one.len();
        for depth in 2..=8 {
            let fam = truncated_stable_sample(&sys, &cloud, &x, &eps, depth).unwrap();
            assert!(fam.len() <= prev);
            prev = fam.len();
        }
    }

    #[test]
    fn preimage_stable_counts_prefixes() {
        let sys = shift(3, 10);
        let x = word(&sys, &[1, 2]);
        let mut pts = vec![x.clone()];
        let levels: Vec<Vec<u16>> = vec![vec![1, 2, 0], vec![1, 1], vec![0, 2], vec![2, 2, 1]];
        pts.extend(levels.iter().map(|p| word(&sys, p)));
        let cloud = SampleCloud::explicit(&sys, pts, "probe");
        let eps = q(1, 2);
        let stable = truncated_stable_sample(&sys, &cloud, &x, &eps, 3).unwrap();
        let pre = preimage_stable_sample(&sys, &cloud, &x, &eps, 2, 3, 1000).unwrap();
        assert_eq!(pre.len(), 9 * stable.len());
        pre.verify(&sys).unwrap();
        assert_eq!(symbolic_disagreements(&sys, &cloud, &pre).unwrap(), 0);
        let zero = preimage_stable_sample(&sys, &cloud, &x, &eps, 0, 3, 1000).unwrap();
        assert_eq!(zero.members.points, stable.members.points);
        assert!(matches!(
            preimage_stable_sample(&sys, &cloud, &x, &eps, 6, 3, 100),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn doubling_preimages_of_a_ball() {
        let sys = SystemSpec::Interval(crate::systems::IntervalMap::Doubling);
        let cloud = sample_cloud(&sys, Scheme::UniformRandom, 400, 8).unwrap();
        let fam = preimage_neighborhood_sample(&sys, &cloud, &Point::Real(0.5), &q(1, 10), 1, 10_000).unwrap();
        assert!(fam.len() >= 4);
        for p in &fam.members.points {
            let v = p.as_real().unwrap();
            assert!((0.2 < v && v < 0.3) || (0.7 < v && v < 0.8) || v == 0.25 || v == 0.75, "{v}");
        }
        fam.verify(&sys).unwrap();
    }

    #[test]
    fn shift_preimage_ball_is_prefix_product() {
        let sys = shift(2, 10);
        let x = word(&sys, &[1, 0, 1]);
        let near = word(&sys, &[1, 0, 1, 0, 0, 0, 0, 0, 0, 1]);
        let far = word(&sys, &[0, 1]);
        let cloud = SampleCloud::explicit(&sys, vec![near.clone(), far], "probe");
        let fam = preimage_neighborhood_sample(&sys, &cloud, &x, &q(1, 4), 1, 100).unwrap();
        let expect: Vec<Point> = [0u16, 1].iter().map(|&c| {
            let mut w = vec![c];
            w.extend_from_slice(&x.as_word().unwrap()[..9]);
            Point::Word(w)
        }).collect();
        assert_eq!(fam.members.points, expect);
        assert_eq!(symbolic_disagreements(&sys, &cloud, &fam).unwrap(), 0);
    }

    #[test]
    fn injective_finite_preimages_do_not_grow() {
        let d = vec![vec![q(0, 1), q(1, 2), q(1, 2)], vec![q(1, 2), q(0, 1), q(1, 2)], vec![q(1, 2), q(1, 2), q(0, 1)]];
        let sys = SystemSpec::Finite(FiniteSystem::new(d, vec![1, 2, 0]).unwrap());
        let cloud = sample_cloud(&sys, Scheme::Grid, 3, 0).unwrap();
        for n in 0..4 {
            let st = truncated_stable_sample(&sys, &cloud, &Point::Index(0), &q(3, 4), 2).unwrap();
            let pre = preimage_stable_sample(&sys, &cloud, &Point::Index(0), &q(3, 4), n, 2, 100).unwrap();
            assert!(pre.len() <= st.len());
        }
    }

    #[test]
    fn dispersion_on_finite_systems_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let fin = FiniteSystem::random(&mut rng, 7);
        let sys = SystemSpec::Finite(fin);
        let cloud = sample_cloud(&sys, Scheme::Grid, 7, 0).unwrap();
        for kind in [Dispersion::TailBall, Dispersion::PreimageOfBall, Dispersion::PreimageOfStable { depth: 2 }] {
            let rows = dispersion_series(
                &sys, &cloud, &Point::Index(0), &q(1, 2), &q(1, 8), (1, 5), kind,
                &Potential::zero(), Engine::Cloud(Mode::Exact), &KernelConfig::default(),
            );
            match rows {
                Ok(rows) => assert!(rows.iter().all(|r| r.spanning.log_value <= 7f64.ln() + 1e-12)),
                Err(e) => assert!(matches!(e, Error::EmptyNeighborhood(_)), "{e}"),
            }
        }
    }

    #[test]
    fn tail_ball_construction_meets_spaced_box() {
        let s = ShiftSystem::grid(24, 24).unwrap();
        let sys = SystemSpec::Shift(s);
        let x = word(&sys, &[]);
        let cloud = SampleCloud::explicit(&sys, vec![], "none");
        let rows = dispersion_series(
            &sys, &cloud, &x, &q(1, 2), &q(1, 24), (1, 4), Dispersion::TailBall,
            &Potential::zero(), Engine::Construction, &KernelConfig::default(),
        )
        .unwrap();
        for r in rows {
            assert!(r.separated.log_value >= r.n as f64 * 5f64.ln() - 1e-9);
            assert!(r.separated.log_value <= r.spanning.log_value + 1e-9);
        }
    }

    #[test]
    fn preimage_ball_on_two_symbols_matches_brute_force() {
        let sys = shift(2, 8);
        let x = word(&sys, &[1]);
        let cloud = SampleCloud::explicit(&sys, vec![], "none");
        let delta = q(1, 2);
        let cons = dispersion_series(
            &sys, &cloud, &x, &q(3, 4), &delta, (1, 3), Dispersion::PreimageOfBall,
            &Potential::zero(), Engine::Construction, &KernelConfig::default(),
        )
        .unwrap();
        let exact = dispersion_series(
            &sys, &cloud, &x, &q(3, 4), &delta, (1, 3), Dispersion::PreimageOfBall,
            &Potential::zero(), Engine::Cloud(Mode::Exact), &KernelConfig { exact_limit: 16, ..Default::default() },
        )
        .unwrap();
        for (c, e) in cons.iter().zip(&exact) {
            assert!((c.separated.log_value - c.n as f64 * 2f64.ln()).abs() < 1e-9);
            assert!(c.separated.log_value <= e.separated.log_value + 1e-9);
            assert!(e.spanning.log_value <= c.spanning.log_value + 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn block_windows_nest(seed in 0u64..500, m in 0usize..3, extra in 0usize..3, e in 1i64..6) {
            let sys = SystemSpec::Shift(ShiftSystem::grid(4, 14).unwrap());
            let cloud = sample_cloud(&sys, Scheme::UniformRandom, 150, seed).unwrap();
            let x = cloud.points[0].clone();
            let eps = q(e, 8);
            let a = block_stable_sample(&sys, &cloud, &x, &eps, m, m + 1).unwrap();
            let b = block_stable_sample(&sys, &cloud, &x, &eps, m, m + 1 + extra).unwrap();
            prop_assert!(b.members.points.iter().all(|p| a.members.points.contains(p)));
            let wider = block_stable_sample(&sys, &cloud, &x, &q(e + 1, 8), m, m + 1).unwrap();
            prop_assert!(a.members.points.iter().all(|p| wider.members.points.contains(p)));
            prop_assert_eq!(symbolic_disagreements(&sys, &cloud, &b).unwrap(), 0);
        }
    }
}
