use std::path::Path;

use mdim_core::covering::{KernelConfig, Mode};
use mdim_core::cp::CpSearch;
use mdim_core::estimators::{geometric_ladder, Estimation};
use mdim_core::pressure::{RateMethod, DEFAULT_WINDOW};
use mdim_core::rational::parse_q;
use mdim_core::systems::{point_from_json, sample_cloud, Point, Potential, PotentialJson, SampleCloud, Scheme, SystemJson, SystemSpec};
use mdim_core::{Error, Q};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudConfig {
    pub scheme: Scheme,
    pub size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for CloudConfig {
    fn default() -> Self {
        CloudConfig { scheme: Scheme::UniformRandom, size: 256, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LadderConfig {
    Explicit(Vec<String>),
    Geometric { start: String, rungs: usize },
}

/// Experiment description as read from JSON. Every field is optional; the
/// subcommands fill in defaults and complain about what they need.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud: Option<CloudConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<LadderConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_bracket: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_points: Option<Vec<Value>>,
    /// Use the first `k` cloud points as base points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_sample: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<RateMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hard_n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hard_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub const DEFAULT_BASE_SAMPLE: usize = 32;

#[derive(Debug)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub hash: String,
    pub seed: u64,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

pub fn load(path: Option<&Path>) -> Result<ExperimentConfig, Error> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| invalid(format!("malformed config {}: {e}", path.display())))?;
    if let Some(file) = cfg.system_file.take() {
        if cfg.system.is_some() {
            return Err(invalid("give either `system` or `system_file`, not both"));
        }
        let p = path.parent().unwrap_or(Path::new(".")).join(&file);
        let body = std::fs::read_to_string(&p).map_err(|e| invalid(format!("cannot read {}: {e}", p.display())))?;
        cfg.system = Some(serde_json::from_str(&body).map_err(|e| Error::InvalidSystem(format!("{}: {e}", p.display())))?);
    }
    Ok(cfg)
}

/// Applies command-line overrides and hashes the result.
pub fn resolve(mut config: ExperimentConfig, seed: Option<u64>, exact_limit: Option<usize>, budget: Option<usize>) -> Resolved {
    if seed.is_some() {
        config.seed = seed;
    }
    if exact_limit.is_some() {
        config.exact_limit = exact_limit;
    }
    if budget.is_some() {
        config.budget = budget;
    }
    let canonical = serde_json::to_vec(&config).expect("config serializes");
    let digest = Sha256::digest(&canonical);
    Resolved { seed: config.seed.unwrap_or(0), hash: hex::encode(&digest[..8]), config }
}

impl Resolved {
    pub fn system(&self) -> Result<SystemSpec, Error> {
        self.config.system.as_ref().ok_or_else(|| invalid("config needs a `system`"))?.build()
    }

    pub fn cloud(&self, sys: &SystemSpec) -> Result<SampleCloud, Error> {
        let c = self.config.cloud.clone().unwrap_or_else(|| match sys {
            SystemSpec::Finite(f) => CloudConfig { scheme: Scheme::Grid, size: f.point_count(), seed: None },
            _ => CloudConfig::default(),
        });
        sample_cloud(sys, c.scheme, c.size, c.seed.unwrap_or(self.seed))
    }

    pub fn potential(&self, sys: &SystemSpec) -> Result<Potential, Error> {
        match &self.config.potential {
            None => Ok(Potential::zero()),
            Some(p) => p.build(sys),
        }
    }

    pub fn q_field(&self, value: &Option<String>, name: &str) -> Result<Q, Error> {
        parse_q(value.as_deref().ok_or_else(|| invalid(format!("config needs `{name}`")))?)
    }

    pub fn epsilon(&self) -> Result<Q, Error> {
        self.q_field(&self.config.epsilon, "epsilon")
    }

    pub fn delta(&self) -> Result<Q, Error> {
        self.q_field(&self.config.delta, "delta")
    }

    pub fn ladder(&self) -> Result<Vec<Q>, Error> {
        match &self.config.ladder {
            None => Err(invalid("config needs a `ladder`")),
            Some(LadderConfig::Explicit(v)) => v.iter().map(|t| parse_q(t)).collect(),
            Some(LadderConfig::Geometric { start, rungs }) => Ok(geometric_ladder(parse_q(start)?, *rungs)),
        }
    }

    pub fn radii(&self) -> Result<Vec<Q>, Error> {
        self.config.radii.as_ref().ok_or_else(|| invalid("config needs `radii`"))?.iter().map(|t| parse_q(t)).collect()
    }

    pub fn n(&self) -> Result<usize, Error> {
        self.config.n.ok_or_else(|| invalid("config needs `n`"))
    }

    pub fn kernel(&self) -> KernelConfig {
        let d = KernelConfig::default();
        KernelConfig {
            exact_limit: self.config.exact_limit.unwrap_or(d.exact_limit),
            budget: self.config.budget.unwrap_or(d.budget),
            ..d
        }
    }

    pub fn mode(&self) -> Mode {
        self.config.mode.unwrap_or(Mode::Greedy)
    }

    pub fn estimation(&self) -> Estimation {
        let d = Estimation::default();
        Estimation {
            window: self.config.window.unwrap_or(DEFAULT_WINDOW),
            mode: self.mode(),
            method: self.config.method.unwrap_or(d.method),
            cfg: self.kernel(),
            search: CpSearch {
                n_grid: self.config.n_grid.clone().unwrap_or(d.search.n_grid),
                span: self.config.span.unwrap_or(d.search.span),
                tolerance: d.search.tolerance,
            },
            s_bracket: self.config.s_bracket.unwrap_or(d.s_bracket),
        }
    }

    pub fn base_points(&self, sys: &SystemSpec, cloud: &SampleCloud) -> Result<Vec<Point>, Error> {
        match &self.config.base_points {
            Some(v) => v.iter().map(|p| point_from_json(sys, p)).collect(),
            None => {
                let k = self.config.base_sample.unwrap_or(DEFAULT_BASE_SAMPLE).min(cloud.len());
                if k == 0 {
                    return Err(invalid("no base points"));
                }
                Ok(cloud.points[..k].to_vec())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_overrides() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"epsilon":"1/2","seed":3}"#).unwrap();
        let a = resolve(cfg.clone(), None, None, None);
        let b = resolve(cfg.clone(), None, None, None);
        let c = resolve(cfg, Some(4), None, None);
        assert_eq!(a.hash, b.hash);
        assert_ne!(a.hash, c.hash);
        assert_eq!(c.seed, 4);
        assert_eq!(a.hash.len(), 16);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"epsilom":"1/2"}"#).is_err());
    }

    #[test]
    fn ladders_parse_both_ways() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"ladder":{"start":"1/4","rungs":4}}"#).unwrap();
        let r = resolve(cfg, None, None, None);
        assert_eq!(r.ladder().unwrap().len(), 4);
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"ladder":["1/2","1/4"]}"#).unwrap();
        assert_eq!(resolve(cfg, None, None, None).ladder().unwrap()[1], mdim_core::q(1, 4));
    }
}
