use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Point, SystemSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Grid,
    UniformRandom,
    Orbit,
    /// Points produced by a filter or a construction rather than a sampler.
    Explicit,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Grid => "grid",
            Scheme::UniformRandom => "uniform_random",
            Scheme::Orbit => "orbit",
            Scheme::Explicit => "explicit",
        }
    }
}

/// A finite, reproducible sample of a subset `Z` of phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCloud {
    pub system: String,
    pub scheme: Scheme,
    pub size: usize,
    pub seed: u64,
    pub points: Vec<Point>,
    pub subset_label: String,
}

impl SampleCloud {
    pub fn explicit(sys: &SystemSpec, points: Vec<Point>, subset_label: impl Into<String>) -> Self {
        SampleCloud {
            system: sys.label(),
            scheme: Scheme::Explicit,
            size: points.len(),
            seed: 0,
            points,
            subset_label: subset_label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The sub-cloud at the given indices, keeping generation metadata.
    pub fn select(&self, indices: &[usize], subset_label: impl Into<String>) -> SampleCloud {
        let points: Vec<Point> = indices.iter().map(|&i| self.points[i].clone()).collect();
        SampleCloud { size: points.len(), points, subset_label: subset_label.into(), ..self.clone() }
    }

    pub fn validate(&self, sys: &SystemSpec) -> Result<()> {
        self.points.iter().try_for_each(|p| sys.validate_point(p))
    }
}

pub fn sample_cloud(sys: &SystemSpec, scheme: Scheme, size: usize, seed: u64) -> Result<SampleCloud> {
    if size == 0 {
        return Err(Error::InvalidConfig("cloud size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = match (scheme, sys) {
        (Scheme::Grid, SystemSpec::Finite(f)) => (0..size.min(f.point_count())).map(Point::Index).collect(),
        (Scheme::Grid, SystemSpec::Shift(s)) => {
            let k = s.alphabet_size() as u128;
            let h = s.horizon();
            let total = k.checked_pow(h as u32).unwrap_or(u128::MAX);
            let count = (size as u128).min(total) as usize;
            (0..count)
                .map(|i| {
                    let mut w = vec![0u16; h];
                    let mut rest = i as u128;
                    for slot in w.iter_mut().rev() {
                        *slot = (rest % k) as u16;
                        rest /= k;
                    }
                    Point::Word(w)
                })
                .collect()
        }
        (Scheme::Grid, SystemSpec::Interval(_)) => {
            (0..size).map(|i| Point::Real(i as f64 / size as f64)).collect()
        }
        (Scheme::UniformRandom, SystemSpec::Finite(f)) => {
            let n = f.point_count();
            index::sample(&mut rng, n, size.min(n)).into_iter().map(Point::Index).collect()
        }
        (Scheme::UniformRandom, SystemSpec::Shift(s)) => (0..size)
            .map(|_| Point::Word(random_word(&mut rng, s.alphabet_size(), s.horizon())))
            .collect(),
        (Scheme::UniformRandom, SystemSpec::Interval(_)) => {
            (0..size).map(|_| Point::Real(rng.gen::<f64>())).collect()
        }
        (Scheme::Orbit, _) => {
            let start = match sys {
                SystemSpec::Finite(f) => Point::Index(rng.gen_range(0..f.point_count())),
                SystemSpec::Shift(s) => Point::Word(random_word(&mut rng, s.alphabet_size(), s.horizon())),
                SystemSpec::Interval(_) => Point::Real(rng.gen::<f64>()),
            };
            let mut out = Vec::with_capacity(size);
            let mut p = start;
            for _ in 0..size {
                let next = sys.apply(&p, 1)?;
                out.push(p);
                p = next;
            }
            out
        }
        (Scheme::Explicit, _) => {
            return Err(Error::SchemeUnsupported {
                scheme: scheme.name().into(),
                system: sys.kind_name().into(),
            })
        }
    };
    Ok(SampleCloud {
        system: sys.label(),
        scheme,
        size: points.len(),
        seed,
        points,
        subset_label: "X".into(),
    })
}

pub(crate) fn random_word(rng: &mut impl Rng, k: usize, h: usize) -> Vec<u16> {
    (0..h).map(|_| rng.gen_range(0..k as u16)).collect()
}
