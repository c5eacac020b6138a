//! JSON system definitions. Rationals are carried as `"p/q"` strings.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{FiniteSystem, IntervalMap, Point, Potential, ShiftSystem, SystemSpec};
use crate::error::{Error, Result};
use crate::rational::{format_q, parse_q, Q};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemJson {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_values: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_resolution: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_matrix: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval_map: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logistic_r: Option<String>,
}

fn need<T>(v: Option<T>, key: &str, kind: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidSystem(format!("{kind} requires `{key}`")))
}

impl SystemJson {
    pub fn build(&self) -> Result<SystemSpec> {
        let kind = self.kind.as_str();
        match kind {
            "FiniteSystem" => {
                let rows = need(self.distance_matrix.as_ref(), "distance_matrix", kind)?;
                let distance = rows
                    .iter()
                    .map(|r| r.iter().map(|t| parse_q(t)).collect::<Result<Vec<Q>>>())
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| Error::InvalidSystem(e.to_string()))?;
                let map = need(self.map.clone(), "map", kind)?;
                Ok(SystemSpec::Finite(FiniteSystem::new(distance, map)?))
            }
            "SymbolicShift" => {
                let levels = need(self.level_values.as_ref(), "level_values", kind)?
                    .iter()
                    .map(|t| parse_q(t))
                    .collect::<Result<Vec<Q>>>()
                    .map_err(|e| Error::InvalidSystem(e.to_string()))?;
                if let Some(k) = self.alphabet_size {
                    if k != levels.len() {
                        return Err(Error::InvalidSystem(format!(
                            "alphabet_size {k} but {} level values",
                            levels.len()
                        )));
                    }
                }
                let h = need(self.horizon, "horizon", kind)?;
                Ok(SystemSpec::Shift(ShiftSystem::symbolic(levels, h)?))
            }
            "GridShift" => {
                let g = need(self.grid_resolution, "grid_resolution", kind)?;
                let h = need(self.horizon, "horizon", kind)?;
                Ok(SystemSpec::Shift(ShiftSystem::grid(g, h)?))
            }
            "IntervalMap" => {
                let name = need(self.interval_map.as_deref(), "interval_map", kind)?;
                let map = match name {
                    "doubling" => IntervalMap::Doubling,
                    "tent" => IntervalMap::Tent,
                    "logistic" => {
                        let r = parse_q(need(self.logistic_r.as_deref(), "logistic_r", kind)?)
                            .map_err(|e| Error::InvalidSystem(e.to_string()))?;
                        if r <= Q::from_integer(0) || r > Q::from_integer(4) {
                            return Err(Error::InvalidSystem("logistic_r must lie in (0, 4]".into()));
                        }
                        IntervalMap::Logistic(r)
                    }
                    other => return Err(Error::InvalidSystem(format!("unknown interval map {other:?}"))),
                };
                Ok(SystemSpec::Interval(map))
            }
            other => Err(Error::InvalidSystem(format!("unknown system kind {other:?}"))),
        }
    }

    pub fn from_system(sys: &SystemSpec) -> SystemJson {
        let mut out = SystemJson { kind: sys.kind_name().into(), ..Default::default() };
        match sys {
            SystemSpec::Finite(f) => {
                out.distance_matrix =
                    Some(f.distance_matrix().iter().map(|r| r.iter().map(format_q).collect()).collect());
                out.map = Some(f.map().to_vec());
            }
            SystemSpec::Shift(s) => {
                out.horizon = Some(s.horizon());
                match s.grid_resolution() {
                    Some(g) => out.grid_resolution = Some(g),
                    None => {
                        out.alphabet_size = Some(s.alphabet_size());
                        out.level_values = Some(s.levels().iter().map(format_q).collect());
                    }
                }
            }
            SystemSpec::Interval(m) => {
                out.interval_map = Some(m.name().into());
                if let IntervalMap::Logistic(r) = m {
                    out.logistic_r = Some(format_q(r));
                }
            }
        }
        out
    }
}

pub fn load_system(text: &str) -> Result<SystemSpec> {
    let doc: SystemJson =
        serde_json::from_str(text).map_err(|e| Error::InvalidSystem(format!("malformed system JSON: {e}")))?;
    doc.build()
}

/// Reads a point in the representation of `sys`: an index, a word, or a real
/// (decimal or `"p/q"`).
pub fn point_from_json(sys: &SystemSpec, v: &Value) -> Result<Point> {
    let bad = || Error::InvalidPoint(format!("{v} is not a point of {}", sys.kind_name()));
    let p = match sys {
        SystemSpec::Finite(_) => Point::Index(v.as_u64().ok_or_else(bad)? as usize),
        SystemSpec::Shift(s) => {
            let items = v.as_array().ok_or_else(bad)?;
            let mut w = items
                .iter()
                .map(|c| c.as_u64().filter(|&c| c <= u16::MAX as u64).map(|c| c as u16))
                .collect::<Option<Vec<u16>>>()
                .ok_or_else(bad)?;
            if w.len() > s.horizon() {
                return Err(bad());
            }
            w.resize(s.horizon(), 0);
            Point::Word(w)
        }
        SystemSpec::Interval(_) => match v {
            Value::Number(n) => Point::Real(n.as_f64().ok_or_else(bad)?),
            Value::String(t) => Point::Real(crate::rational::to_f64(&parse_q(t)?)),
            _ => return Err(bad()),
        },
    };
    sys.validate_point(&p)?;
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialJson {
    Constant { value: String },
    CoordinateProjection,
    DistanceToPoint { point: Value },
    Table { values: Vec<String> },
}

impl PotentialJson {
    pub fn build(&self, sys: &SystemSpec) -> Result<Potential> {
        let f = match self {
            PotentialJson::Constant { value } => Potential::Constant(parse_q(value)?),
            PotentialJson::CoordinateProjection => Potential::CoordinateProjection,
            PotentialJson::DistanceToPoint { point } => Potential::DistanceToPoint(point_from_json(sys, point)?),
            PotentialJson::Table { values } => {
                Potential::Table(values.iter().map(|t| parse_q(t)).collect::<Result<_>>()?)
            }
        };
        f.validate(sys)?;
        Ok(f)
    }
}
