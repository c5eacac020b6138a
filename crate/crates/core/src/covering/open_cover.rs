use std::collections::BTreeMap;

use serde::Serialize;

use super::solver::{self, BitSet};
use super::{BoundType, CountBound, KernelConfig, Method, Mode};
use crate::error::{Error, Result};
use crate::rational::Q;
use crate::systems::{Point, SampleCloud, SystemSpec};

/// One open set of a finite cover.
#[derive(Debug, Clone, PartialEq)]
pub enum CoverElement {
    Whole,
    /// Open metric ball `B(center, radius)`.
    Ball { center: Point, radius: Q },
    /// An explicit finite set of points.
    Points(Vec<Point>),
}

impl CoverElement {
    pub fn contains(&self, sys: &SystemSpec, x: &Point) -> bool {
        match self {
            CoverElement::Whole => true,
            CoverElement::Ball { center, radius } => sys.cut(radius).open(sys.distance_unchecked(center, x)),
            CoverElement::Points(ps) => ps.contains(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpenCoverSpec {
    pub elements: Vec<CoverElement>,
    pub diameter_bound: Option<Q>,
    pub lebesgue_bound: Option<Q>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubcoverBound {
    pub bound: CountBound,
    /// Chosen join cells as tuples of cover indices `(u_0, …, u_{n-1})`.
    pub cells: Vec<Vec<u32>>,
    pub occupied_cells: usize,
}

/// `N(𝒰ⁿ | Z)`: the fewest cells of the join `∨_{j<n} T^{-j}𝒰` covering the cloud.
pub fn min_subcover_count(
    sys: &SystemSpec,
    cover: &OpenCoverSpec,
    n: usize,
    cloud: &SampleCloud,
    mode: Mode,
    cfg: &KernelConfig,
) -> Result<SubcoverBound> {
    if n == 0 {
        return Err(Error::InvalidConfig("join length must be positive".into()));
    }
    if cloud.is_empty() {
        return Err(Error::InvalidConfig("subcover count needs a nonempty cloud".into()));
    }
    cloud.validate(sys)?;
    if mode == Mode::Exact {
        cfg.check_exact(cloud.len())?;
    }
    let cell_limit = match mode {
        Mode::Exact => cfg.join_limit,
        Mode::Greedy => cfg.budget,
    };
    // per point, per iterate: the cover elements containing T^j x
    let mut memberships: Vec<Vec<Vec<u32>>> = Vec::with_capacity(cloud.len());
    let mut enumerated = 0usize;
    for (i, x) in cloud.points.iter().enumerate() {
        let mut per_j = Vec::with_capacity(n);
        let mut p = x.clone();
        let mut tuples = 1usize;
        for j in 0..n {
            if j > 0 {
                p = sys.apply(&p, 1)?;
            }
            let hits: Vec<u32> = (0..cover.elements.len() as u32)
                .filter(|&u| cover.elements[u as usize].contains(sys, &p))
                .collect();
            if hits.is_empty() {
                return Err(Error::CoverIncomplete(format!("T^{j} of cloud point {i} lies in no element")));
            }
            tuples = tuples.saturating_mul(hits.len());
            per_j.push(hits);
        }
        enumerated = enumerated.saturating_add(tuples);
        if enumerated > cell_limit {
            return Err(Error::InstanceTooLarge { size: enumerated, limit: cell_limit });
        }
        memberships.push(per_j);
    }
    let mut cells: BTreeMap<Vec<u32>, BitSet> = BTreeMap::new();
    for (i, per_j) in memberships.iter().enumerate() {
        let mut idx = vec![0usize; n];
        'odometer: loop {
            let key: Vec<u32> = (0..n).map(|j| per_j[j][idx[j]]).collect();
            cells.entry(key).or_insert_with(|| BitSet::new(cloud.len())).insert(i);
            for j in (0..n).rev() {
                idx[j] += 1;
                if idx[j] < per_j[j].len() {
                    continue 'odometer;
                }
                idx[j] = 0;
            }
            break;
        }
    }
    let keys: Vec<Vec<u32>> = cells.keys().cloned().collect();
    let masks: Vec<BitSet> = cells.into_values().collect();
    let w = vec![1.0; masks.len()];
    let chosen = match mode {
        Mode::Exact => {
            let m128: Vec<u128> = masks.iter().map(BitSet::to_u128).collect();
            solver::exact_min_cover(BitSet::full(cloud.len()).to_u128(), &m128, &w).map(|(s, _)| s)
        }
        Mode::Greedy => solver::greedy_cover(&BitSet::full(cloud.len()), &masks, &w),
    }
    .ok_or_else(|| Error::CoverIncomplete("join cells do not cover the cloud".into()))?;
    let (bound_type, method) = match mode {
        Mode::Exact => (BoundType::Exact, Method::BruteForce),
        Mode::Greedy => (BoundType::Upper, Method::Greedy),
    };
    Ok(SubcoverBound {
        bound: CountBound {
            log_value: (chosen.len() as f64).ln(),
            bound_type,
            method,
            witness: None,
            caveats: vec![],
        },
        occupied_cells: keys.len(),
        cells: chosen.into_iter().map(|i| keys[i].clone()).collect(),
    })
}

/// Cover by open `ε/2`-balls around a greedy `ε/4`-net of the cloud, so that
/// every element has diameter at most `ε` and the Lebesgue number on the
/// cloud is at least `ε/4`.
pub fn cover_from_net(sys: &SystemSpec, cloud: &SampleCloud, eps: &Q) -> Result<OpenCoverSpec> {
    if cloud.is_empty() {
        return Err(Error::InvalidConfig("cover needs a nonempty cloud".into()));
    }
    if *eps <= Q::from_integer(0) {
        return Err(Error::InvalidConfig("radius must be positive".into()));
    }
    cloud.validate(sys)?;
    let quarter = sys.cut(&(*eps / 4));
    let half = *eps / 2;
    let mut net: Vec<&Point> = Vec::new();
    for p in &cloud.points {
        if !net.iter().any(|c| quarter.open(sys.distance_unchecked(c, p))) {
            net.push(p);
        }
    }
    let spec = OpenCoverSpec {
        elements: net.iter().map(|c| CoverElement::Ball { center: (*c).clone(), radius: half }).collect(),
        diameter_bound: Some(*eps),
        lebesgue_bound: Some(*eps / 4),
    };
    if !verify_cover_bounds(sys, &spec, cloud) {
        return Err(Error::InvariantViolation("net cover failed its diameter/Lebesgue check".into()));
    }
    Ok(spec)
}

/// Checks on the cloud that elements have diameter `≤ diameter_bound` and
/// that every cloud neighborhood of radius `lebesgue_bound` lies in one element.
pub fn verify_cover_bounds(sys: &SystemSpec, cover: &OpenCoverSpec, cloud: &SampleCloud) -> bool {
    let members: Vec<Vec<&Point>> = cover
        .elements
        .iter()
        .map(|e| cloud.points.iter().filter(|p| e.contains(sys, p)).collect())
        .collect();
    if let Some(d) = &cover.diameter_bound {
        let cut = sys.cut(d);
        for m in &members {
            for a in m {
                for b in m {
                    if !cut.closed(sys.distance_unchecked(a, b)) {
                        return false;
                    }
                }
            }
        }
    }
    if let Some(l) = &cover.lebesgue_bound {
        let cut = sys.cut(l);
        for x in &cloud.points {
            let nbhd: Vec<&Point> = cloud.points.iter().filter(|y| cut.open(sys.distance_unchecked(x, y))).collect();
            if !cover.elements.iter().any(|e| nbhd.iter().all(|y| e.contains(sys, y))) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covering::exact_spanning_number;
    use crate::rational::q;
    use crate::systems::{sample_cloud, FiniteSystem, IntervalMap, Scheme};
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

    fn count(b: &SubcoverBound) -> usize {
        b.bound.value().round() as usize
    }

    #[test]
    fn whole_space_and_partition() {
        let sys = SystemSpec::Interval(IntervalMap::Doubling);
        let cloud = sample_cloud(&sys, Scheme::Grid, 8, 0).unwrap();
        let cfg = KernelConfig::default();
        let whole = OpenCoverSpec { elements: vec![CoverElement::Whole], diameter_bound: None, lebesgue_bound: None };
        assert_eq!(count(&min_subcover_count(&sys, &whole, 3, &cloud, Mode::Exact, &cfg).unwrap()), 1);
        let halves = OpenCoverSpec {
            elements: vec![
                CoverElement::Ball { center: Point::Real(0.25), radius: q(26, 100) },
                CoverElement::Ball { center: Point::Real(0.75), radius: q(1, 4) },
            ],
            diameter_bound: None,
            lebesgue_bound: None,
        };
        assert_eq!(count(&min_subcover_count(&sys, &halves, 1, &cloud, Mode::Exact, &cfg).unwrap()), 2);
    }

    #[test]
    fn three_point_join_matches_enumeration() {
        let sys = three_point();
        let cloud = sample_cloud(&sys, Scheme::Grid, 3, 0).unwrap();
        let cover = OpenCoverSpec {
            elements: vec![
                CoverElement::Points(vec![Point::Index(0), Point::Index(1)]),
                CoverElement::Points(vec![Point::Index(1), Point::Index(2)]),
            ],
            diameter_bound: None,
            lebesgue_bound: None,
        };
        let b = min_subcover_count(&sys, &cover, 2, &cloud, Mode::Exact, &KernelConfig::default()).unwrap();
        // occupied cells U_a ∩ T^{-1}U_b: (0,0) = {p0}, (0,1) = {p0,p1}, (1,1) = {p1,p2}
        assert_eq!(count(&b), 2);
        assert_eq!(b.cells, vec![vec![0, 1], vec![1, 1]]);
        assert_eq!(b.occupied_cells, 3);
    }

    #[test]
    fn incomplete_cover_rejected() {
        let sys = three_point();
        let cloud = sample_cloud(&sys, Scheme::Grid, 3, 0).unwrap();
        let cover = OpenCoverSpec {
            elements: vec![CoverElement::Points(vec![Point::Index(0)])],
            diameter_bound: None,
            lebesgue_bound: None,
        };
        let err = min_subcover_count(&sys, &cover, 1, &cloud, Mode::Exact, &KernelConfig::default());
        assert!(matches!(err, Err(Error::CoverIncomplete(_))));
    }

    #[test]
    fn net_cover_examples() {
        let sys = SystemSpec::Interval(IntervalMap::Tent);
        let single = SampleCloud::explicit(&sys, vec![Point::Real(0.3)], "x");
        assert_eq!(cover_from_net(&sys, &single, &q(1, 2)).unwrap().elements.len(), 1);
        let ends = SampleCloud::explicit(&sys, vec![Point::Real(0.0), Point::Real(1.0)], "ends");
        assert_eq!(cover_from_net(&sys, &ends, &q(1, 2)).unwrap().elements.len(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn net_cover_bounds_hold(seed in 0u64..1000, k in 1i64..8) {
            let sys = SystemSpec::Interval(IntervalMap::Doubling);
            let cloud = sample_cloud(&sys, Scheme::UniformRandom, 40, seed).unwrap();
            let cover = cover_from_net(&sys, &cloud, &q(k, 8)).unwrap();
            prop_assert!(verify_cover_bounds(&sys, &cover, &cloud));
        }

        #[test]
        fn subcover_dominates_spanning(seed in 0u64..1000, size in 2usize..10, n in 1usize..4, k in 1i64..8) {
            let sys = SystemSpec::Finite(FiniteSystem::random(&mut ChaCha8Rng::seed_from_u64(seed), size));
            let cloud = sample_cloud(&sys, Scheme::Grid, size, 0).unwrap();
            let eps = q(k, 8);
            let cover = cover_from_net(&sys, &cloud, &(eps / 2)).unwrap();
            let cfg = KernelConfig { join_limit: 1 << 16, ..Default::default() };
            let sub = min_subcover_count(&sys, &cover, n, &cloud, Mode::Exact, &cfg);
            // images of cloud points stay inside the finite space, which the net covers
            let sub = sub.unwrap();
            let r = exact_spanning_number(&sys, &cloud, n, &eps, None, &cfg).unwrap();
            prop_assert!(r.value() <= sub.bound.value() + 1e-9);
        }
    }
}
