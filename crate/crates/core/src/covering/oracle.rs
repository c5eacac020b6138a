//! Exhaustive-subset oracles for small instances. They share no code with the
//! branch-and-bound solvers and exist to cross-check them.

use crate::bowen::{bowen_distance, checked_cut};
use crate::error::{Error, Result};
use crate::rational::Q;
use crate::systems::{Point, Potential, SystemSpec};

use super::{log_sum_exp, log_weights};

/// Largest subset universe the oracles enumerate.
pub const ORACLE_LIMIT: usize = 22;

fn check(size: usize) -> Result<()> {
    if size > ORACLE_LIMIT {
        return Err(Error::InstanceTooLarge { size, limit: ORACLE_LIMIT });
    }
    Ok(())
}

fn subset_log_sum(sub: u32, logs: &[f64]) -> f64 {
    let terms: Vec<f64> = (0..logs.len()).filter(|&i| sub >> i & 1 == 1).map(|i| logs[i]).collect();
    log_sum_exp(&terms)
}

/// Minimum of `ln Σ_{i∈S} e^{logs_i}` over subsets `S` whose masks cover `universe`.
pub fn min_cover_log(universe: u128, masks: &[u128], logs: &[f64]) -> Result<Option<f64>> {
    check(masks.len())?;
    let mut best: Option<f64> = None;
    for sub in 1u32..(1u32 << masks.len()) {
        let cov = (0..masks.len()).filter(|&i| sub >> i & 1 == 1).fold(0u128, |a, i| a | masks[i]);
        if cov & universe == universe {
            let v = subset_log_sum(sub, logs);
            if best.is_none_or(|b| v < b) {
                best = Some(v);
            }
        }
    }
    Ok(best)
}

/// Maximum of `ln Σ_{i∈S} e^{logs_i}` over independent sets `S` of `adj`.
pub fn max_packing_log(adj: &[u128], logs: &[f64]) -> Result<f64> {
    check(adj.len())?;
    let mut best = f64::NEG_INFINITY;
    for sub in 1u32..(1u32 << adj.len()) {
        let independent = (0..adj.len()).all(|i| sub >> i & 1 == 0 || (adj[i] & sub as u128) == 0);
        if independent {
            best = best.max(subset_log_sum(sub, logs));
        }
    }
    Ok(best)
}

/// Exhaustive weighted spanning sum of `targets` with centers from `centers`.
pub fn spanning_sum(
    sys: &SystemSpec,
    targets: &[Point],
    centers: &[Point],
    n: usize,
    eps: &Q,
    f: &Potential,
) -> Result<Option<f64>> {
    let cut = checked_cut(sys, n, eps)?;
    if targets.len() > 128 {
        return Err(Error::InstanceTooLarge { size: targets.len(), limit: 128 });
    }
    let mut masks = Vec::with_capacity(centers.len());
    for c in centers {
        let mut m = 0u128;
        for (i, t) in targets.iter().enumerate() {
            if cut.open(bowen_distance(sys, c, t, n)?) {
                m |= 1 << i;
            }
        }
        masks.push(m);
    }
    let universe = if targets.len() == 128 { u128::MAX } else { (1u128 << targets.len()) - 1 };
    min_cover_log(universe, &masks, &log_weights(sys, centers, n, eps, f)?)
}

/// Exhaustive weighted separated sum over subsets of `points`.
pub fn separated_sum(sys: &SystemSpec, points: &[Point], n: usize, eps: &Q, f: &Potential) -> Result<f64> {
    let cut = checked_cut(sys, n, eps)?;
    check(points.len())?;
    let mut adj = vec![0u128; points.len()];
    for i in 0..points.len() {
        for j in 0..points.len() {
            if i != j && cut.open(bowen_distance(sys, &points[i], &points[j], n)?) {
                adj[i] |= 1 << j;
            }
        }
    }
    max_packing_log(&adj, &log_weights(sys, points, n, eps, f)?)
}
