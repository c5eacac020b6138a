use num_traits::{Signed, Zero};
use serde::Serialize;

use super::{Point, SampleCloud, SystemSpec};
use crate::error::{Error, Result};
use crate::rational::{to_f64, Q};

/// A continuous observable `f : X → ℝ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Constant(Q),
    /// `f(x) = v_{x_0}` on shifts, `f(x) = x` on the interval.
    CoordinateProjection,
    DistanceToPoint(Point),
    /// One value per point of a finite system.
    Table(Vec<Q>),
}

impl Potential {
    pub fn zero() -> Self {
        Potential::Constant(Q::zero())
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Potential::Constant(c) => c.is_zero(),
            Potential::Table(v) => v.iter().all(|c| c.is_zero()),
            _ => false,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Potential::Constant(_) => "constant",
            Potential::CoordinateProjection => "coordinate_projection",
            Potential::DistanceToPoint(_) => "distance_to_point",
            Potential::Table(_) => "table",
        }
    }

    /// Fails unless the potential is defined on `sys`.
    pub fn validate(&self, sys: &SystemSpec) -> Result<()> {
        match (self, sys) {
            (Potential::Constant(_), _) => Ok(()),
            (Potential::CoordinateProjection, SystemSpec::Shift(_) | SystemSpec::Interval(_)) => Ok(()),
            (Potential::DistanceToPoint(p), _) => sys.validate_point(p),
            (Potential::Table(v), SystemSpec::Finite(f)) if v.len() == f.point_count() => Ok(()),
            _ => Err(Error::InvalidConfig(format!(
                "potential {} not defined on {}",
                self.name(),
                sys.kind_name()
            ))),
        }
    }

    pub fn eval(&self, sys: &SystemSpec, x: &Point) -> f64 {
        match self.eval_exact(sys, x) {
            Some(v) => to_f64(&v),
            None => match (self, x) {
                (Potential::CoordinateProjection, Point::Real(v)) => *v,
                (Potential::DistanceToPoint(p), _) => sys.dist_to_f64(sys.distance_unchecked(x, p)),
                _ => f64::NAN,
            },
        }
    }

    /// Exact value when both the potential and the point are rational.
    pub fn eval_exact(&self, sys: &SystemSpec, x: &Point) -> Option<Q> {
        match (self, sys, x) {
            (Potential::Constant(c), _, _) => Some(*c),
            (Potential::CoordinateProjection, SystemSpec::Shift(s), Point::Word(w)) => {
                Some(s.levels()[w[0] as usize])
            }
            (Potential::Table(v), _, Point::Index(i)) => v.get(*i).copied(),
            (Potential::DistanceToPoint(p), SystemSpec::Finite(f), Point::Index(i)) => {
                let j = p.as_index()?;
                Some(f.distance_matrix()[*i][j])
            }
            _ => None,
        }
    }

    /// `||f|| = sup |f|`, analytic for every variant.
    pub fn sup_norm(&self, sys: &SystemSpec) -> f64 {
        match self {
            Potential::Constant(c) => to_f64(&c.abs()),
            Potential::CoordinateProjection => match sys {
                SystemSpec::Shift(s) => s.levels().iter().map(|v| to_f64(&v.abs())).fold(0.0, f64::max),
                _ => 1.0,
            },
            Potential::DistanceToPoint(_) => sys.diameter(),
            Potential::Table(v) => v.iter().map(|c| to_f64(&c.abs())).fold(0.0, f64::max),
        }
    }

    /// `S_n f(x) = Σ_{j<n} f(T^j x)`.
    pub fn birkhoff_sum(&self, sys: &SystemSpec, x: &Point, n: usize) -> Result<f64> {
        self.check_orbit(sys, x, n)?;
        if let Some(v) = self.birkhoff_exact_unchecked(sys, x, n) {
            return Ok(to_f64(&v));
        }
        let mut p = x.clone();
        let mut acc = 0.0;
        for j in 0..n {
            if j > 0 {
                p = sys.apply(&p, 1)?;
            }
            acc += self.eval(sys, &p);
        }
        Ok(acc)
    }

    /// Birkhoff sum in exact arithmetic, `None` if the potential is not
    /// rational-valued on this system.
    pub fn birkhoff_exact(&self, sys: &SystemSpec, x: &Point, n: usize) -> Result<Option<Q>> {
        self.check_orbit(sys, x, n)?;
        Ok(self.birkhoff_exact_unchecked(sys, x, n))
    }

    fn check_orbit(&self, sys: &SystemSpec, x: &Point, n: usize) -> Result<()> {
        sys.validate_point(x)?;
        self.validate(sys)?;
        if n == 0 {
            return Err(Error::InvalidConfig("Birkhoff sum length must be positive".into()));
        }
        if let SystemSpec::Shift(s) = sys {
            if n - 1 > s.horizon() {
                return Err(Error::HorizonExceeded { needed: n - 1, horizon: s.horizon() });
            }
        }
        Ok(())
    }

    fn birkhoff_exact_unchecked(&self, sys: &SystemSpec, x: &Point, n: usize) -> Option<Q> {
        match (self, sys, x) {
            (Potential::Constant(c), _, _) => Some(*c * Q::from_integer(n as i64)),
            (Potential::CoordinateProjection, SystemSpec::Shift(s), Point::Word(w)) => {
                let pad = s.levels()[0];
                let inside: Q = w.iter().take(n).map(|&c| s.levels()[c as usize]).sum();
                let outside = n.saturating_sub(w.len()) as i64;
                Some(inside + pad * Q::from_integer(outside))
            }
            (Potential::Table(_) | Potential::DistanceToPoint(_), SystemSpec::Finite(f), Point::Index(i)) => {
                let mut acc = Q::zero();
                let mut p = *i;
                for _ in 0..n {
                    acc += self.eval_exact(sys, &Point::Index(p))?;
                    p = f.map()[p];
                }
                Some(acc)
            }
            _ => None,
        }
    }
}

/// The modulus `γ(ε)` as an empirical lower bound from cloud pairs together
/// with an analytic upper bound when one is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulusBound {
    pub empirical: f64,
    pub analytic: Option<f64>,
}

impl ModulusBound {
    /// The value safe to use inside upper-bound constants.
    pub fn upper(&self) -> Option<f64> {
        self.analytic
    }
}

pub fn continuity_modulus(
    sys: &SystemSpec,
    f: &Potential,
    cloud: &SampleCloud,
    eps: &Q,
) -> Result<ModulusBound> {
    f.validate(sys)?;
    if cloud.points.is_empty() {
        return Err(Error::InvalidConfig("continuity modulus needs a nonempty cloud".into()));
    }
    let cut = sys.cut(eps);
    let values: Vec<f64> = cloud.points.iter().map(|p| f.eval(sys, p)).collect();
    let mut empirical: f64 = 0.0;
    for i in 0..cloud.points.len() {
        for j in i + 1..cloud.points.len() {
            if cut.open(sys.distance_unchecked(&cloud.points[i], &cloud.points[j])) {
                empirical = empirical.max((values[i] - values[j]).abs());
            }
        }
    }
    Ok(ModulusBound { empirical, analytic: analytic_modulus(sys, f, eps) })
}

fn analytic_modulus(sys: &SystemSpec, f: &Potential, eps: &Q) -> Option<f64> {
    match (f, sys) {
        (Potential::Constant(_), _) => Some(0.0),
        // |v_{x_0} - v_{y_0}| is the weight-one term of d(x, y)
        (Potential::CoordinateProjection, _) | (Potential::DistanceToPoint(_), _) => Some(to_f64(eps)),
        (Potential::Table(v), SystemSpec::Finite(fs)) => {
            let cut = sys.cut(eps);
            let n = fs.point_count();
            let mut best = Q::zero();
            for i in 0..n {
                for j in i + 1..n {
                    if cut.open(super::Dist::Exact(fs.scaled(i, j) as u128)) {
                        let d = (v[i] - v[j]).abs();
                        if d > best {
                            best = d;
                        }
                    }
                }
            }
            Some(to_f64(&best))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::systems::{sample_cloud, FiniteSystem, IntervalMap, Scheme, ShiftSystem};
    use proptest::prelude::*;

    fn binary_shift(h: usize) -> SystemSpec {
        SystemSpec::Shift(ShiftSystem::symbolic(vec![q(0, 1), q(1, 1)], h).unwrap())
    }

    #[test]
    fn constant_sum_is_linear() {
        let sys = SystemSpec::Interval(IntervalMap::Doubling);
        let f = Potential::Constant(q(3, 2));
        assert_eq!(f.birkhoff_sum(&sys, &Point::Real(0.1), 4).unwrap(), 6.0);
    }

    #[test]
    fn single_step_is_evaluation() {
        let sys = SystemSpec::Interval(IntervalMap::Tent);
        let f = Potential::CoordinateProjection;
        assert_eq!(f.birkhoff_sum(&sys, &Point::Real(0.3), 1).unwrap(), 0.3);
    }

    #[test]
    fn projection_sums_letters() {
        let sys = binary_shift(3);
        let f = Potential::CoordinateProjection;
        assert_eq!(f.birkhoff_sum(&sys, &Point::Word(vec![1, 0, 1]), 3).unwrap(), 2.0);
    }

    #[test]
    fn orbit_beyond_horizon_is_rejected() {
        let sys = binary_shift(3);
        let err = Potential::CoordinateProjection.birkhoff_sum(&sys, &Point::Word(vec![1, 0, 1]), 6);
        assert!(matches!(err, Err(Error::HorizonExceeded { .. })));
    }

    #[test]
    fn modulus_examples() {
        let sys = SystemSpec::Shift(ShiftSystem::grid(4, 10).unwrap());
        let cloud = sample_cloud(&sys, Scheme::UniformRandom, 50, 1).unwrap();
        let zero = continuity_modulus(&sys, &Potential::Constant(q(1, 1)), &cloud, &q(1, 2)).unwrap();
        assert_eq!(zero, ModulusBound { empirical: 0.0, analytic: Some(0.0) });

        let proj = continuity_modulus(&sys, &Potential::CoordinateProjection, &cloud, &q(1, 2)).unwrap();
        assert_eq!(proj.analytic, Some(0.5));
        assert!(proj.empirical <= 0.5);

        let fin = SystemSpec::Finite(
            FiniteSystem::new(
                vec![
                    vec![q(0, 1), q(1, 5), q(7, 10)],
                    vec![q(1, 5), q(0, 1), q(1, 2)],
                    vec![q(7, 10), q(1, 2), q(0, 1)],
                ],
                vec![1, 2, 2],
            )
            .unwrap(),
        );
        let table = Potential::Table(vec![q(0, 1), q(1, 3), q(1, 1)]);
        let all = sample_cloud(&fin, Scheme::Grid, 3, 0).unwrap();
        let m = continuity_modulus(&fin, &table, &all, &q(3, 5)).unwrap();
        // only the pairs (0,1) and (1,2) are closer than 3/5
        assert!((m.empirical - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.analytic.unwrap() - m.empirical).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn cocycle_identity_exact(
            w in proptest::collection::vec(0u16..3, 12),
            n in 1usize..6,
            m in 1usize..6,
        ) {
            let sys = SystemSpec::Shift(ShiftSystem::symbolic(vec![q(0, 1), q(1, 3), q(1, 1)], 12).unwrap());
            let f = Potential::CoordinateProjection;
            let x = Point::Word(w);
            let whole = f.birkhoff_exact(&sys, &x, n + m).unwrap().unwrap();
            let head = f.birkhoff_exact(&sys, &x, n).unwrap().unwrap();
            let tail = f.birkhoff_exact(&sys, &sys.apply(&x, n).unwrap(), m).unwrap().unwrap();
            prop_assert_eq!(whole, head + tail);
        }

        #[test]
        fn birkhoff_bounded_by_norm(x in 0.0f64..1.0, n in 1usize..20) {
            let sys = SystemSpec::Interval(IntervalMap::Logistic(q(4, 1)));
            for f in [Potential::CoordinateProjection, Potential::DistanceToPoint(Point::Real(0.25))] {
                let s = f.birkhoff_sum(&sys, &Point::Real(x), n).unwrap();
                prop_assert!(s.abs() <= n as f64 * f.sup_norm(&sys) + 1e-12);
            }
        }
    }
}
