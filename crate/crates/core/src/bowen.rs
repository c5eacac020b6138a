//! Bowen distances `d_n`, Bowen balls and block-stable membership.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::rational::Q;
use crate::systems::{Closure, Cut, Dist, Point, SampleCloud, SystemSpec};

/// Pairwise matrices are materialized up to this many points.
pub const MEMO_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowenQuery {
    pub n: usize,
    #[serde(with = "crate::rational::serde_q")]
    pub epsilon: Q,
    pub closure: Closure,
    /// `[m, n]` block of iterates; `None` means `[0, n-1]`.
    pub window: Option<(usize, usize)>,
}

impl BowenQuery {
    pub fn open(n: usize, epsilon: Q) -> Self {
        BowenQuery { n, epsilon, closure: Closure::Open, window: None }
    }

    pub fn closed(n: usize, epsilon: Q) -> Self {
        BowenQuery { n, epsilon, closure: Closure::Closed, window: None }
    }

    pub fn block(m: usize, n: usize, epsilon: Q) -> Self {
        BowenQuery { n, epsilon, closure: Closure::Closed, window: Some((m, n)) }
    }

    /// Iterates `[lo, hi]` constrained by the query.
    pub fn span(&self) -> Result<(usize, usize)> {
        match self.window {
            Some((m, n)) if m <= n => Ok((m, n)),
            Some((m, n)) => Err(Error::InvalidConfig(format!("window [{m},{n}] has m > n"))),
            None if self.n >= 1 => Ok((0, self.n - 1)),
            None => Err(Error::InvalidConfig("Bowen length must be positive".into())),
        }
    }

    fn validate(&self, sys: &SystemSpec) -> Result<(usize, usize)> {
        if self.epsilon <= Q::from_integer(0) {
            return Err(Error::InvalidConfig("radius must be positive".into()));
        }
        let (lo, hi) = self.span()?;
        sys.check_horizon(hi + 1, &self.epsilon)?;
        Ok((lo, hi))
    }
}

/// `max_{j ∈ [m, n]} d(T^j x, T^j y)` without validation.
pub(crate) fn window_distance_unchecked(sys: &SystemSpec, x: &Point, y: &Point, m: usize, n: usize) -> Dist {
    match (sys, x, y) {
        (SystemSpec::Shift(s), Point::Word(a), Point::Word(b)) => Dist::Exact(s.window_distance(a, b, m, n)),
        (SystemSpec::Finite(f), Point::Index(i), Point::Index(j)) => {
            let (mut p, mut q) = (f.image(*i, m), f.image(*j, m));
            let mut best = 0u64;
            for _ in m..=n {
                best = best.max(f.scaled(p, q));
                p = f.map()[p];
                q = f.map()[q];
            }
            Dist::Exact(best as u128)
        }
        (SystemSpec::Interval(map), Point::Real(a), Point::Real(b)) => {
            let (mut p, mut q) = (*a, *b);
            let mut best: f64 = 0.0;
            for j in 0..=n {
                if j >= m {
                    best = best.max((p - q).abs());
                }
                p = map.step(p);
                q = map.step(q);
            }
            Dist::Float(best)
        }
        _ => unreachable!("points validated against the system"),
    }
}

fn check_length(sys: &SystemSpec, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidConfig("Bowen length must be positive".into()));
    }
    if let SystemSpec::Shift(s) = sys {
        if n > s.horizon() {
            return Err(Error::HorizonExceeded { needed: n, horizon: s.horizon() });
        }
    }
    Ok(())
}

/// `d_n(x, y) = max_{0 ≤ j < n} d(T^j x, T^j y)`.
pub fn bowen_distance(sys: &SystemSpec, x: &Point, y: &Point, n: usize) -> Result<Dist> {
    sys.validate_point(x)?;
    sys.validate_point(y)?;
    check_length(sys, n)?;
    Ok(window_distance_unchecked(sys, x, y, 0, n - 1))
}

/// `y ∈ W_{ε,[m,n]}(x)`: `d(T^j x, T^j y) ≤ ε` for every `j ∈ [m, n]`.
pub fn block_stable_contains(sys: &SystemSpec, x: &Point, y: &Point, eps: &Q, m: usize, n: usize) -> Result<bool> {
    sys.validate_point(x)?;
    sys.validate_point(y)?;
    let q = BowenQuery::block(m, n, *eps);
    let (lo, hi) = q.validate(sys)?;
    Ok(sys.cut(eps).closed(window_distance_unchecked(sys, x, y, lo, hi)))
}

/// Cloud points in the Bowen ball of `center` described by `query`, in cloud order.
pub fn ball_members(sys: &SystemSpec, cloud: &SampleCloud, center: &Point, query: &BowenQuery) -> Result<SampleCloud> {
    sys.validate_point(center)?;
    cloud.validate(sys)?;
    let (lo, hi) = query.validate(sys)?;
    let cut = sys.cut(&query.epsilon);
    let keep = par::map(&cloud.points, |p| cut.within(window_distance_unchecked(sys, center, p, lo, hi), query.closure));
    let idx: Vec<usize> = keep.iter().enumerate().filter(|(_, k)| **k).map(|(i, _)| i).collect();
    Ok(cloud.select(&idx, format!("{}∩ball", cloud.subset_label)))
}

enum Store {
    Exact(Vec<u128>),
    Float(Vec<f64>),
}

/// `d_n` on every pair of a point list, materialized when the list has at
/// most [`MEMO_LIMIT`] points and evaluated on demand otherwise.
pub struct PairMatrix<'a> {
    sys: &'a SystemSpec,
    points: &'a [Point],
    n: usize,
    store: Option<Store>,
}

fn tri_index(i: usize, j: usize) -> usize {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    b * (b - 1) / 2 + a
}

impl<'a> PairMatrix<'a> {
    pub fn new(sys: &'a SystemSpec, points: &'a [Point], n: usize) -> Result<Self> {
        check_length(sys, n)?;
        points.iter().try_for_each(|p| sys.validate_point(p))?;
        let len = points.len();
        let store = if (2..=MEMO_LIMIT).contains(&len) {
            let rows = par::map_range(1..len, |b| {
                (0..b).map(|a| window_distance_unchecked(sys, &points[a], &points[b], 0, n - 1)).collect::<Vec<_>>()
            });
            let flat = rows.into_iter().flatten();
            Some(match sys {
                SystemSpec::Interval(_) => Store::Float(
                    flat.map(|d| match d {
                        Dist::Float(v) => v,
                        Dist::Exact(_) => unreachable!(),
                    })
                    .collect(),
                ),
                _ => Store::Exact(
                    flat.map(|d| match d {
                        Dist::Exact(v) => v,
                        Dist::Float(_) => unreachable!(),
                    })
                    .collect(),
                ),
            })
        } else {
            None
        };
        Ok(PairMatrix { sys, points, n, store })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Dist {
        if i == j {
            return match self.sys {
                SystemSpec::Interval(_) => Dist::Float(0.0),
                _ => Dist::Exact(0),
            };
        }
        match &self.store {
            Some(Store::Exact(v)) => Dist::Exact(v[tri_index(i, j)]),
            Some(Store::Float(v)) => Dist::Float(v[tri_index(i, j)]),
            None => window_distance_unchecked(self.sys, &self.points[i], &self.points[j], 0, self.n - 1),
        }
    }
}

/// `Cut` for `eps` after the horizon check for length `n`.
pub fn checked_cut(sys: &SystemSpec, n: usize, eps: &Q) -> Result<Cut> {
    if *eps <= Q::from_integer(0) {
        return Err(Error::InvalidConfig("radius must be positive".into()));
    }
    check_length(sys, n)?;
    sys.check_horizon(n, eps)?;
    Ok(sys.cut(eps))
}
