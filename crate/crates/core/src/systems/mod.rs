//! Concrete dynamical systems: finite metric systems, one-sided symbolic
//! shifts over rational levels, and the classical interval maps.
//!
//! Symbolic and finite systems evaluate their metric in exact integer units
//! (`Dist::Exact`), so strict and non-strict radius comparisons never depend on
//! rounding. Interval maps use binary floating point with [`FLOAT_TOLERANCE`].

mod cloud;
mod json;
mod potential;

pub use cloud::{sample_cloud, SampleCloud, Scheme};
pub use json::{load_system, point_from_json, PotentialJson, SystemJson};
pub use potential::{continuity_modulus, ModulusBound, Potential};

use num_integer::Integer;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{common_denominator, scaled_floor_ceil, to_f64, Q};

/// Equality tolerance for interval-map distances.
pub const FLOAT_TOLERANCE: f64 = 1.0 / (1u64 << 40) as f64;

/// Upper limits keeping every scaled distance inside `u128`.
pub const MAX_HORIZON: usize = 64;
pub const MAX_DENOMINATOR: u64 = 1 << 32;

/// A point of one of the supported phase spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Point {
    Index(usize),
    Word(Vec<u16>),
    Real(f64),
}

impl Point {
    pub fn as_index(&self) -> Option<usize> {
        match self {
            Point::Index(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_word(&self) -> Option<&[u16]> {
        match self {
            Point::Word(w) => Some(w),
            _ => None,
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            Point::Real(x) => Some(*x),
            _ => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Point::Index(i) => serde_json::json!(i),
            Point::Word(w) => serde_json::json!(w),
            Point::Real(x) => serde_json::json!(x),
        }
    }
}

/// A metric value in the unit of its system.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum Dist {
    Exact(u128),
    Float(f64),
}

impl Dist {
    pub fn zero_like(self) -> Dist {
        match self {
            Dist::Exact(_) => Dist::Exact(0),
            Dist::Float(_) => Dist::Float(0.0),
        }
    }

    pub fn max(self, other: Dist) -> Dist {
        if other > self {
            other
        } else {
            self
        }
    }
}

/// Whether a radius comparison is strict (`< ε`, open balls and spanning)
/// or not (`≤ ε`, closed balls and stable sets).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Closure {
    Open,
    Closed,
}

/// A radius compiled into the unit of a system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cut {
    /// `d < lt` is open membership, `d <= le` closed membership.
    Exact { lt: u128, le: u128 },
    Float { eps: f64 },
}

impl Cut {
    pub fn open(&self, d: Dist) -> bool {
        match (self, d) {
            (Cut::Exact { lt, .. }, Dist::Exact(v)) => v < *lt,
            (Cut::Float { eps }, Dist::Float(v)) => v < eps - FLOAT_TOLERANCE,
            _ => unreachable!("distance and radius from different systems"),
        }
    }

    pub fn closed(&self, d: Dist) -> bool {
        match (self, d) {
            (Cut::Exact { le, .. }, Dist::Exact(v)) => v <= *le,
            (Cut::Float { eps }, Dist::Float(v)) => v <= eps + FLOAT_TOLERANCE,
            _ => unreachable!("distance and radius from different systems"),
        }
    }

    pub fn within(&self, d: Dist, closure: Closure) -> bool {
        match closure {
            Closure::Open => self.open(d),
            Closure::Closed => self.closed(d),
        }
    }
}

/// A finite metric space with a self-map given by an index array.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSystem {
    distance: Vec<Vec<Q>>,
    scaled: Vec<u64>,
    denom: u64,
    map: Vec<usize>,
}

impl FiniteSystem {
    pub fn new(distance: Vec<Vec<Q>>, map: Vec<usize>) -> Result<Self> {
        let n = distance.len();
        if n == 0 {
            return Err(Error::InvalidSystem("finite system needs at least one point".into()));
        }
        if map.len() != n {
            return Err(Error::InvalidSystem(format!("map has {} entries for {n} points", map.len())));
        }
        if let Some(bad) = map.iter().find(|&&m| m >= n) {
            return Err(Error::InvalidSystem(format!("map image {bad} out of range")));
        }
        for row in &distance {
            if row.len() != n {
                return Err(Error::InvalidSystem("distance matrix is not square".into()));
            }
        }
        let denom = common_denominator(distance.iter().flatten())
            .filter(|d| *d <= MAX_DENOMINATOR)
            .ok_or_else(|| Error::InvalidSystem("distance denominators too large".into()))?;
        let mut scaled = vec![0u64; n * n];
        for i in 0..n {
            for j in 0..n {
                let v = distance[i][j];
                if v < Q::zero() {
                    return Err(Error::InvalidSystem(format!("negative distance at ({i},{j})")));
                }
                let s = v * Q::from_integer(denom as i64);
                scaled[i * n + j] = s.to_integer() as u64;
            }
        }
        for i in 0..n {
            if scaled[i * n + i] != 0 {
                return Err(Error::InvalidSystem(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                if scaled[i * n + j] != scaled[j * n + i] {
                    return Err(Error::InvalidSystem(format!("asymmetric entry ({i},{j})")));
                }
                if i != j && scaled[i * n + j] == 0 {
                    return Err(Error::InvalidSystem(format!("distinct points {i},{j} at distance 0")));
                }
                for k in 0..n {
                    if scaled[i * n + k] > scaled[i * n + j] + scaled[j * n + k] {
                        return Err(Error::InvalidSystem(format!(
                            "triangle inequality fails for ({i},{j},{k})"
                        )));
                    }
                }
            }
        }
        Ok(FiniteSystem { distance, scaled, denom, map })
    }

    /// A random system on distinct points of the integer grid `[0, 20]²`
    /// under the L¹ metric scaled by 1/20, with a random self-map.
    pub fn random(rng: &mut impl rand::Rng, points: usize) -> FiniteSystem {
        let mut coords: Vec<(i64, i64)> = Vec::with_capacity(points);
        while coords.len() < points {
            let c = (rng.gen_range(0..=20), rng.gen_range(0..=20));
            if !coords.contains(&c) {
                coords.push(c);
            }
        }
        let distance = coords
            .iter()
            .map(|a| coords.iter().map(|b| Q::new((a.0 - b.0).abs() + (a.1 - b.1).abs(), 20)).collect())
            .collect();
        let map = (0..points).map(|_| rng.gen_range(0..points)).collect();
        FiniteSystem::new(distance, map).expect("grid L1 metric is valid")
    }

    pub fn point_count(&self) -> usize {
        self.map.len()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn distance_matrix(&self) -> &[Vec<Q>] {
        &self.distance
    }

    pub fn scaled(&self, i: usize, j: usize) -> u64 {
        self.scaled[i * self.map.len() + j]
    }

    pub fn image(&self, i: usize, k: usize) -> usize {
        let mut p = i;
        for _ in 0..k {
            p = self.map[p];
        }
        p
    }

    /// Smallest `n0` such that every pair orbit has entered its cycle by time
    /// `n0`, together with the lcm `period` of the cycle lengths of the map.
    /// From `n0` on, every predicate built from `d_n` and `T^{-n}` is periodic
    /// in `n` with period `period`, and `d_n` itself is constant.
    pub fn eventual_regime(&self) -> (usize, usize) {
        let p = self.point_count();
        // tail length and cycle length of every point
        let mut tail = vec![0usize; p];
        let mut cycle = vec![0usize; p];
        for start in 0..p {
            let mut seen = vec![usize::MAX; p];
            let mut cur = start;
            let mut t = 0;
            while seen[cur] == usize::MAX {
                seen[cur] = t;
                cur = self.map[cur];
                t += 1;
            }
            tail[start] = seen[cur];
            cycle[start] = t - seen[cur];
        }
        let period = cycle.iter().fold(1usize, |acc, &c| acc.lcm(&c));
        // pair orbits are eventually periodic once both coordinates are on
        // their cycles; the maximum over the orbit is then realized within one
        // joint period after that.
        let max_tail = tail.iter().copied().max().unwrap_or(0);
        (max_tail + period, period)
    }
}

/// One-sided shift over levels `v_0..v_{k-1}` with metric
/// `d(x,y) = Σ 2^{-i} |v_{x_i} - v_{y_i}|`, truncated at the horizon `H`.
/// Coordinates beyond the horizon are the padding symbol 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSystem {
    levels: Vec<Q>,
    scaled: Vec<u64>,
    denom: u64,
    horizon: usize,
    grid: Option<u32>,
}

impl ShiftSystem {
    pub fn symbolic(levels: Vec<Q>, horizon: usize) -> Result<Self> {
        Self::build(levels, horizon, None)
    }

    /// The discretized `[0,1]^ℕ` shift with levels `j/g`, `j = 0..=g`.
    pub fn grid(resolution: u32, horizon: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidSystem("grid resolution must be positive".into()));
        }
        let levels = (0..=resolution as i64).map(|j| Q::new(j, resolution as i64)).collect();
        Self::build(levels, horizon, Some(resolution))
    }

    fn build(levels: Vec<Q>, horizon: usize, grid: Option<u32>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::InvalidSystem("alphabet size must be at least 2".into()));
        }
        if levels.len() > u16::MAX as usize {
            return Err(Error::InvalidSystem("alphabet too large".into()));
        }
        if horizon == 0 || horizon > MAX_HORIZON {
            return Err(Error::InvalidSystem(format!("horizon must be in 1..={MAX_HORIZON}")));
        }
        if levels.iter().any(|v| *v < Q::zero() || *v > Q::from_integer(1)) {
            return Err(Error::InvalidSystem("level values must lie in [0,1]".into()));
        }
        let denom = common_denominator(&levels)
            .filter(|d| *d <= MAX_DENOMINATOR)
            .ok_or_else(|| Error::InvalidSystem("level denominators too large".into()))?;
        let scaled = levels
            .iter()
            .map(|v| (*v * Q::from_integer(denom as i64)).to_integer() as u64)
            .collect::<Vec<u64>>();
        let mut sorted = scaled.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSystem("level values must be distinct".into()));
        }
        Ok(ShiftSystem { levels, scaled, denom, horizon, grid })
    }

    pub fn alphabet_size(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Q] {
        &self.levels
    }

    /// Level values scaled to integers by [`Self::level_denominator`].
    pub fn scaled_levels(&self) -> &[u64] {
        &self.scaled
    }

    pub fn level_denominator(&self) -> u64 {
        self.denom
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn grid_resolution(&self) -> Option<u32> {
        self.grid
    }

    /// Distance unit: one unit is `1 / (denom · 2^{H-1})`.
    pub fn unit(&self) -> u128 {
        (self.denom as u128) << (self.horizon - 1)
    }

    /// Suffix sums `t_k = Σ_{i ≥ k} 2^{H-1-i} |v_{x_i} - v_{y_i}|`; the shifted
    /// distance `d(T^j x, T^j y)` is `t_j << j` units.
    pub fn suffix_sums(&self, x: &[u16], y: &[u16]) -> Vec<u128> {
        let h = self.horizon;
        let mut t = vec![0u128; h + 1];
        for i in (0..h).rev() {
            let a = self.scaled[x[i] as usize];
            let b = self.scaled[y[i] as usize];
            let diff = a.abs_diff(b) as u128;
            t[i] = t[i + 1] + (diff << (h - 1 - i));
        }
        t
    }

    pub fn shifted_distance(&self, x: &[u16], y: &[u16], j: usize) -> u128 {
        self.suffix_sums(x, y)[j.min(self.horizon)] << j.min(self.horizon)
    }

    /// `max_{j ∈ [m, n]} d(T^j x, T^j y)` in units.
    pub fn window_distance(&self, x: &[u16], y: &[u16], m: usize, n: usize) -> u128 {
        let t = self.suffix_sums(x, y);
        (m..=n)
            .map(|j| {
                let j = j.min(self.horizon);
                t[j] << j
            })
            .max()
            .unwrap_or(0)
    }

    /// Smallest horizon for which radius `eps` decisions on `d_n` are robust:
    /// `n + ⌈log₂(10/ε)⌉`.
    pub fn required_horizon(n: usize, eps: &Q) -> usize {
        let p = *eps.numer() as u128;
        let q = *eps.denom() as u128;
        let mut t = 0usize;
        while t < 127 && (p << t) < 10 * q {
            t += 1;
        }
        n + t
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.scaled.iter().fold((u64::MAX, 0), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let span = (hi - lo) as f64 / self.denom as f64;
        span * (2.0 - 2f64.powi(1 - self.horizon as i32))
    }
}

/// The classical maps on `[0,1]` with the Euclidean metric.
#[derive(Debug, Clone, PartialEq)]
pub enum IntervalMap {
    Doubling,
    Tent,
    Logistic(Q),
}

impl IntervalMap {
    pub fn step(&self, x: f64) -> f64 {
        match self {
            IntervalMap::Doubling => {
                let y = 2.0 * x;
                if y >= 1.0 {
                    y - 1.0
                } else {
                    y
                }
            }
            IntervalMap::Tent => {
                if x < 0.5 {
                    2.0 * x
                } else {
                    2.0 * (1.0 - x)
                }
            }
            IntervalMap::Logistic(r) => to_f64(r) * x * (1.0 - x),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            IntervalMap::Doubling => "doubling",
            IntervalMap::Tent => "tent",
            IntervalMap::Logistic(_) => "logistic",
        }
    }
}

/// A concrete dynamical system `(X, T, d)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemSpec {
    Finite(FiniteSystem),
    Shift(ShiftSystem),
    Interval(IntervalMap),
}

impl SystemSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            SystemSpec::Finite(_) => "FiniteSystem",
            SystemSpec::Shift(s) if s.grid.is_some() => "GridShift",
            SystemSpec::Shift(_) => "SymbolicShift",
            SystemSpec::Interval(_) => "IntervalMap",
        }
    }

    /// Short label used in CSV rows.
    pub fn label(&self) -> String {
        match self {
            SystemSpec::Finite(f) => format!("finite{}", f.point_count()),
            SystemSpec::Shift(s) => match s.grid {
                Some(g) => format!("grid{g}h{}", s.horizon),
                None => format!("shift{}h{}", s.alphabet_size(), s.horizon),
            },
            SystemSpec::Interval(m) => m.name().to_string(),
        }
    }

    pub fn as_shift(&self) -> Option<&ShiftSystem> {
        match self {
            SystemSpec::Shift(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_finite(&self) -> Option<&FiniteSystem> {
        match self {
            SystemSpec::Finite(f) => Some(f),
            _ => None,
        }
    }

    pub fn validate_point(&self, x: &Point) -> Result<()> {
        match (self, x) {
            (SystemSpec::Finite(f), Point::Index(i)) if *i < f.point_count() => Ok(()),
            (SystemSpec::Shift(s), Point::Word(w))
                if w.len() == s.horizon && w.iter().all(|&c| (c as usize) < s.alphabet_size()) =>
            {
                Ok(())
            }
            (SystemSpec::Interval(_), Point::Real(v)) if (0.0..=1.0).contains(v) => Ok(()),
            _ => Err(Error::InvalidPoint(format!("{x:?} is not a point of {}", self.kind_name()))),
        }
    }

    /// `T^k x`.
    pub fn apply(&self, x: &Point, k: usize) -> Result<Point> {
        self.validate_point(x)?;
        match (self, x) {
            (SystemSpec::Finite(f), Point::Index(i)) => Ok(Point::Index(f.image(*i, k))),
            (SystemSpec::Shift(s), Point::Word(w)) => {
                if k > s.horizon {
                    return Err(Error::HorizonExceeded { needed: k, horizon: s.horizon });
                }
                let mut out = vec![0u16; s.horizon];
                out[..s.horizon - k].copy_from_slice(&w[k..]);
                Ok(Point::Word(out))
            }
            (SystemSpec::Interval(m), Point::Real(v)) => {
                let mut y = *v;
                for _ in 0..k {
                    y = m.step(y);
                }
                Ok(Point::Real(y))
            }
            _ => unreachable!(),
        }
    }

    /// Base metric `d(x, y)` in system units.
    pub fn distance(&self, x: &Point, y: &Point) -> Result<Dist> {
        self.validate_point(x)?;
        self.validate_point(y)?;
        Ok(self.distance_unchecked(x, y))
    }

    pub(crate) fn distance_unchecked(&self, x: &Point, y: &Point) -> Dist {
        match (self, x, y) {
            (SystemSpec::Finite(f), Point::Index(i), Point::Index(j)) => {
                Dist::Exact(f.scaled(*i, *j) as u128)
            }
            (SystemSpec::Shift(s), Point::Word(a), Point::Word(b)) => {
                Dist::Exact(s.shifted_distance(a, b, 0))
            }
            (SystemSpec::Interval(_), Point::Real(a), Point::Real(b)) => Dist::Float((a - b).abs()),
            _ => unreachable!("points validated against the system"),
        }
    }

    pub fn dist_to_f64(&self, d: Dist) -> f64 {
        match (self, d) {
            (SystemSpec::Finite(f), Dist::Exact(v)) => v as f64 / f.denom as f64,
            (SystemSpec::Shift(s), Dist::Exact(v)) => v as f64 / s.unit() as f64,
            (_, Dist::Float(v)) => v,
            _ => f64::NAN,
        }
    }

    /// Compiles radius `eps` into this system's distance unit.
    pub fn cut(&self, eps: &Q) -> Cut {
        let unit = match self {
            SystemSpec::Finite(f) => f.denom as u128,
            SystemSpec::Shift(s) => s.unit(),
            SystemSpec::Interval(_) => return Cut::Float { eps: to_f64(eps) },
        };
        let (floor, ceil) = scaled_floor_ceil(eps, unit);
        Cut::Exact { lt: ceil, le: floor }
    }

    /// Fails with `HorizonExceeded` unless radius-`eps` decisions on `d_n`
    /// are robust for this system.
    pub fn check_horizon(&self, n: usize, eps: &Q) -> Result<()> {
        if let SystemSpec::Shift(s) = self {
            let needed = ShiftSystem::required_horizon(n, eps);
            if needed > s.horizon {
                return Err(Error::HorizonExceeded { needed, horizon: s.horizon });
            }
        }
        Ok(())
    }

    pub fn diameter(&self) -> f64 {
        match self {
            SystemSpec::Finite(f) => {
                let max = f.scaled.iter().copied().max().unwrap_or(0);
                max as f64 / f.denom as f64
            }
            SystemSpec::Shift(s) => s.diameter(),
            SystemSpec::Interval(_) => 1.0,
        }
    }

    pub fn supports_preimages(&self) -> bool {
        match self {
            SystemSpec::Finite(_) | SystemSpec::Shift(_) => true,
            SystemSpec::Interval(IntervalMap::Logistic(r)) => *r == Q::from_integer(4),
            SystemSpec::Interval(_) => true,
        }
    }

    /// `{ y : T(y) = x }`. For truncated shifts a word has preimages only when
    /// its last coordinate is padding; otherwise the set is empty.
    pub fn preimages(&self, x: &Point) -> Result<Vec<Point>> {
        self.validate_point(x)?;
        match (self, x) {
            (SystemSpec::Finite(f), Point::Index(i)) => Ok((0..f.point_count())
                .filter(|&j| f.map[j] == *i)
                .map(Point::Index)
                .collect()),
            (SystemSpec::Shift(s), Point::Word(w)) => {
                if w[s.horizon - 1] != 0 {
                    return Ok(Vec::new());
                }
                Ok((0..s.alphabet_size() as u16)
                    .map(|c| {
                        let mut y = Vec::with_capacity(s.horizon);
                        y.push(c);
                        y.extend_from_slice(&w[..s.horizon - 1]);
                        Point::Word(y)
                    })
                    .collect())
            }
            (SystemSpec::Interval(m), Point::Real(v)) => {
                let v = *v;
                let mut out = match m {
                    IntervalMap::Doubling => {
                        if v >= 1.0 {
                            return Ok(Vec::new());
                        }
                        vec![v / 2.0, v / 2.0 + 0.5]
                    }
                    IntervalMap::Tent => vec![v / 2.0, 1.0 - v / 2.0],
                    IntervalMap::Logistic(r) if *r == Q::from_integer(4) => {
                        let s = (1.0 - v).sqrt();
                        vec![(1.0 - s) / 2.0, (1.0 + s) / 2.0]
                    }
                    IntervalMap::Logistic(_) => {
                        return Err(Error::PreimagesUnsupported(
                            "logistic map with r != 4".into(),
                        ))
                    }
                };
                out.dedup_by(|a, b| (*a - *b).abs() <= FLOAT_TOLERANCE);
                Ok(out.into_iter().map(Point::Real).collect())
            }
            _ => unreachable!(),
        }
    }

    /// All points `z` with `T^n z = x`.
    pub fn iterated_preimages(&self, x: &Point, n: usize, budget: usize) -> Result<Vec<Point>> {
        let mut layer = vec![x.clone()];
        for _ in 0..n {
            let mut next = Vec::new();
            for p in &layer {
                next.extend(self.preimages(p)?);
                if next.len() > budget {
                    return Err(Error::BudgetExceeded { needed: next.len(), budget });
                }
            }
            layer = next;
        }
        Ok(layer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use proptest::prelude::*;

    pub(crate) fn three_point() -> SystemSpec {
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

    #[test]
    fn doubling_step_and_identity() {
        let sys = SystemSpec::Interval(IntervalMap::Doubling);
        let y = sys.apply(&Point::Real(0.3), 1).unwrap();
        assert!((y.as_real().unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(sys.apply(&Point::Real(0.3), 0).unwrap(), Point::Real(0.3));
    }

    #[test]
    fn shift_application_pads_with_zero() {
        let sys = SystemSpec::Shift(ShiftSystem::symbolic(vec![q(0, 1), q(1, 2), q(1, 1)], 4).unwrap());
        let y = sys.apply(&Point::Word(vec![2, 0, 1, 1]), 2).unwrap();
        assert_eq!(y, Point::Word(vec![1, 1, 0, 0]));
        let err = sys.apply(&Point::Word(vec![2, 0, 1, 1]), 5).unwrap_err();
        assert!(matches!(err, Error::HorizonExceeded { .. }));
    }

    #[test]
    fn grid_distance_single_coordinate() {
        let sys = SystemSpec::Shift(ShiftSystem::grid(2, 8).unwrap());
        let x = Point::Word(vec![0; 8]);
        let mut w = vec![0; 8];
        w[0] = 2;
        let y = Point::Word(w);
        let d = sys.distance(&x, &y).unwrap();
        assert_eq!(sys.dist_to_f64(d), 1.0);
        assert_eq!(sys.distance(&x, &x).unwrap(), Dist::Exact(0));
    }

    #[test]
    fn finite_distance_is_matrix_entry() {
        let sys = three_point();
        let d = sys.distance(&Point::Index(0), &Point::Index(1)).unwrap();
        assert!((sys.dist_to_f64(d) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn finite_validation_rejects_bad_matrices() {
        let asym = FiniteSystem::new(vec![vec![q(0, 1), q(1, 2)], vec![q(1, 3), q(0, 1)]], vec![0, 1]);
        assert!(asym.is_err());
        let triangle = FiniteSystem::new(
            vec![
                vec![q(0, 1), q(1, 5), q(9, 10)],
                vec![q(1, 5), q(0, 1), q(1, 2)],
                vec![q(9, 10), q(1, 2), q(0, 1)],
            ],
            vec![1, 2, 2],
        );
        assert!(triangle.is_err());
        let bad_map = FiniteSystem::new(vec![vec![q(0, 1)]], vec![1]);
        assert!(bad_map.is_err());
    }

    #[test]
    fn preimage_enumeration() {
        let sys = SystemSpec::Interval(IntervalMap::Doubling);
        let pre = sys.preimages(&Point::Real(0.4)).unwrap();
        assert_eq!(pre.len(), 2);
        assert!((pre[0].as_real().unwrap() - 0.2).abs() < 1e-15);
        assert!((pre[1].as_real().unwrap() - 0.7).abs() < 1e-15);

        let shift = SystemSpec::Shift(ShiftSystem::symbolic(vec![q(0, 1), q(1, 2), q(1, 1)], 5).unwrap());
        let w = Point::Word(vec![1, 2, 0, 0, 0]);
        let pre = shift.preimages(&w).unwrap();
        assert_eq!(pre.len(), 3);
        for p in &pre {
            assert_eq!(shift.apply(p, 1).unwrap(), w);
        }
        let full = Point::Word(vec![1, 2, 0, 0, 1]);
        assert!(shift.preimages(&full).unwrap().is_empty());

        let pre = three_point().preimages(&Point::Index(2)).unwrap();
        assert_eq!(pre, vec![Point::Index(1), Point::Index(2)]);

        let logistic = SystemSpec::Interval(IntervalMap::Logistic(q(7, 2)));
        assert!(matches!(logistic.preimages(&Point::Real(0.5)), Err(Error::PreimagesUnsupported(_))));
    }

    #[test]
    fn eventual_regime_of_finite_map() {
        let f = three_point();
        let (n0, period) = f.as_finite().unwrap().eventual_regime();
        assert_eq!(period, 1);
        assert!(n0 >= 2);
    }

    #[test]
    fn required_horizon_matches_formula() {
        // ⌈log₂(10 / (1/2))⌉ = ⌈log₂ 20⌉ = 5
        assert_eq!(ShiftSystem::required_horizon(3, &q(1, 2)), 8);
        assert_eq!(ShiftSystem::required_horizon(1, &q(10, 1)), 1);
    }

    proptest! {
        #[test]
        fn apply_composes(a in 0usize..6, b in 0usize..6, w in proptest::collection::vec(0u16..3, 12)) {
            let sys = SystemSpec::Shift(ShiftSystem::symbolic(vec![q(0,1), q(1,3), q(1,1)], 12).unwrap());
            let x = Point::Word(w);
            let left = sys.apply(&sys.apply(&x, a).unwrap(), b).unwrap();
            prop_assert_eq!(left, sys.apply(&x, a + b).unwrap());
        }

        #[test]
        fn interval_apply_composes(a in 0usize..8, b in 0usize..8, x in 0.0f64..1.0) {
            let sys = SystemSpec::Interval(IntervalMap::Tent);
            let left = sys.apply(&sys.apply(&Point::Real(x), a).unwrap(), b).unwrap();
            prop_assert_eq!(left, sys.apply(&Point::Real(x), a + b).unwrap());
        }

        #[test]
        fn shift_metric_axioms(
            a in proptest::collection::vec(0u16..5, 10),
            b in proptest::collection::vec(0u16..5, 10),
            c in proptest::collection::vec(0u16..5, 10),
        ) {
            let sys = SystemSpec::Shift(ShiftSystem::grid(4, 10).unwrap());
            let (x, y, z) = (Point::Word(a), Point::Word(b), Point::Word(c));
            let dxy = sys.distance(&x, &y).unwrap();
            prop_assert_eq!(dxy, sys.distance(&y, &x).unwrap());
            prop_assert_eq!(dxy == Dist::Exact(0), x == y);
            let (Dist::Exact(xy), Dist::Exact(yz), Dist::Exact(xz)) =
                (dxy, sys.distance(&y, &z).unwrap(), sys.distance(&x, &z).unwrap()) else { unreachable!() };
            prop_assert!(xz <= xy + yz);
        }

        #[test]
        fn interval_triangle(x in 0.0f64..1.0, y in 0.0f64..1.0, z in 0.0f64..1.0) {
            let sys = SystemSpec::Interval(IntervalMap::Doubling);
            let d = |a: f64, b: f64| sys.dist_to_f64(sys.distance(&Point::Real(a), &Point::Real(b)).unwrap());
            prop_assert!(d(x, z) <= d(x, y) + d(y, z) + FLOAT_TOLERANCE);
        }
    }
}
