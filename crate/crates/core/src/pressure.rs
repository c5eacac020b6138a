//! Finite-window growth rates of counts and weighted sums, and the pressure
//! (or scale entropy) at a fixed scale built from them.

use serde::{Deserialize, Serialize};

use crate::covering::{
    max_weighted_separated_sum, min_weighted_spanning_sum, separated_box, spanning_grid, BoundType, ConstraintSet,
    CountBound, KernelConfig, Mode,
};
use crate::error::{Error, Result};
use crate::par;
use crate::rational::{serde_q, Q};
use crate::systems::{Potential, SampleCloud, ShiftSystem, SystemSpec};

pub const DEFAULT_WINDOW: (usize, usize) = (2, 8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMethod {
    EndpointSlope,
    LeastSquares,
}

impl RateMethod {
    pub fn name(&self) -> &'static str {
        match self {
            RateMethod::EndpointSlope => "endpoint_slope",
            RateMethod::LeastSquares => "least_squares",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    pub value: f64,
    pub method: RateMethod,
    pub window: (usize, usize),
    /// Root-mean-square deviation of `log p_n` from the fitted line.
    pub residual: f64,
    pub bound_type: BoundType,
}

fn select(series: &[(usize, f64)], window: Option<(usize, usize)>) -> Result<Vec<(usize, f64)>> {
    let mut pts: Vec<(usize, f64)> = series
        .iter()
        .copied()
        .filter(|(n, _)| window.is_none_or(|(lo, hi)| (lo..=hi).contains(n)))
        .collect();
    pts.sort_by_key(|p| p.0);
    pts.dedup_by_key(|p| p.0);
    if pts.len() < 2 {
        return Err(Error::WindowTooSmall(format!("{} entries in window, need 2", pts.len())));
    }
    if let Some(&(n, v)) = pts.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonpositiveValue { n, value: v.exp() });
    }
    Ok(pts)
}

fn fit(pts: &[(usize, f64)], method: RateMethod, bound_type: BoundType) -> RateEstimate {
    let (n0, l0) = pts[0];
    let (n1, l1) = *pts.last().unwrap();
    let (slope, intercept) = match method {
        RateMethod::EndpointSlope => {
            let s = (l1 - l0) / (n1 - n0) as f64;
            (s, l0 - s * n0 as f64)
        }
        RateMethod::LeastSquares => {
            let k = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0 as f64).sum::<f64>() / k;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
            let sxy: f64 = pts.iter().map(|p| (p.0 as f64 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 as f64 - mx).powi(2)).sum();
            let s = sxy / sxx;
            (s, my - s * mx)
        }
    };
    let sq: f64 = pts.iter().map(|&(n, l)| (l - intercept - slope * n as f64).powi(2)).sum();
    let residual = (sq / pts.len() as f64).sqrt();
    RateEstimate { value: slope, method, window: (n0, n1), residual: if residual < 1e-12 { 0.0 } else { residual }, bound_type }
}

/// Growth rate of a positive series `(n, p_n)`, restricted to `window` when
/// given.
pub fn growth_rate(series: &[(usize, f64)], method: RateMethod, window: Option<(usize, usize)>) -> Result<RateEstimate> {
    if let Some(&(n, value)) = series.iter().find(|(_, v)| v.is_nan() || *v <= 0.0) {
        return Err(Error::NonpositiveValue { n, value });
    }
    let logs: Vec<(usize, f64)> = series.iter().map(|&(n, v)| (n, v.ln())).collect();
    Ok(fit(&select(&logs, window)?, method, BoundType::Exact))
}

/// Growth rate of a series of log-valued bounds, which must all bound in the
/// same direction.
pub fn growth_rate_bounds(
    series: &[(usize, CountBound)],
    method: RateMethod,
    window: Option<(usize, usize)>,
) -> Result<RateEstimate> {
    let Some(first) = series.first() else {
        return Err(Error::WindowTooSmall("empty series".into()));
    };
    let bt = first.1.bound_type;
    if let Some((n, b)) = series.iter().find(|(_, b)| b.bound_type != bt) {
        return Err(Error::MixedBounds(format!("{} at n = {n} after {}", b.bound_type.name(), bt.name())));
    }
    let logs: Vec<(usize, f64)> = series.iter().map(|(n, b)| (*n, b.log_value)).collect();
    Ok(fit(&select(&logs, window)?, method, bt))
}

/// Spanning-side and separated-side rates at one scale. `lower`/`upper`
/// order the two values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePair {
    pub spanning: RateEstimate,
    pub separated: RateEstimate,
}

impl RatePair {
    pub fn lower(&self) -> f64 {
        self.spanning.value.min(self.separated.value)
    }

    pub fn upper(&self) -> f64 {
        self.spanning.value.max(self.separated.value)
    }
}

/// One scale's rates together with the per-`n` bounds behind them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleRun {
    #[serde(with = "serde_q")]
    pub scale: Q,
    pub pair: RatePair,
    pub spanning: Vec<(usize, CountBound)>,
    pub separated: Vec<(usize, CountBound)>,
}

fn check_window(window: (usize, usize)) -> Result<()> {
    if window.0 == 0 || window.0 >= window.1 {
        return Err(Error::WindowTooSmall(format!("window [{}, {}]", window.0, window.1)));
    }
    Ok(())
}

/// `P(f, Z, ε)` on a cloud: growth rates of `P_n` and `Q_n` over the window.
#[allow(clippy::too_many_arguments)]
pub fn pressure_at_scale(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    f: &Potential,
    eps: &Q,
    window: (usize, usize),
    mode: Mode,
    cfg: &KernelConfig,
    method: RateMethod,
) -> Result<ScaleRun> {
    check_window(window)?;
    sys.check_horizon(window.1, eps)?;
    let ns: Vec<usize> = (window.0..=window.1).collect();
    let rows = par::try_map(&ns, |&n| {
        let span = min_weighted_spanning_sum(sys, cloud, n, eps, f, mode, cfg)?;
        let sep = max_weighted_separated_sum(sys, cloud, n, eps, f, mode, cfg)?;
        Ok::<_, Error>((n, span, sep))
    })?;
    let spanning: Vec<(usize, CountBound)> = rows.iter().map(|r| (r.0, r.1.clone())).collect();
    let separated: Vec<(usize, CountBound)> = rows.into_iter().map(|r| (r.0, r.2)).collect();
    let pair = RatePair {
        spanning: growth_rate_bounds(&spanning, method, None)?,
        separated: growth_rate_bounds(&separated, method, None)?,
    };
    Ok(ScaleRun { scale: *eps, pair, spanning, separated })
}

/// `h(T, Z, ε)`: [`pressure_at_scale`] with `f = 0`.
pub fn scale_entropy(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    eps: &Q,
    window: (usize, usize),
    mode: Mode,
    cfg: &KernelConfig,
    method: RateMethod,
) -> Result<ScaleRun> {
    pressure_at_scale(sys, cloud, &Potential::zero(), eps, window, mode, cfg, method)
}

/// Scale entropy of a family of constraint sets on a shift, one set per `n`,
/// from product-box constructions: a certified lower bound on separated
/// numbers and an upper bound on spanning numbers at every `n`.
pub fn construction_entropy(
    s: &ShiftSystem,
    family: impl Fn(usize) -> ConstraintSet + Sync + Send,
    delta: &Q,
    window: (usize, usize),
    method: RateMethod,
) -> Result<ScaleRun> {
    check_window(window)?;
    let ns: Vec<usize> = (window.0..=window.1).collect();
    let rows = par::try_map(&ns, |&n| {
        let set = family(n);
        let span = spanning_grid(s, &set, n, delta)?.bound();
        let sep = separated_box(s, &set, n, delta)?.bound();
        Ok::<_, Error>((n, span, sep))
    })?;
    let spanning: Vec<(usize, CountBound)> = rows.iter().map(|r| (r.0, r.1.clone())).collect();
    let separated: Vec<(usize, CountBound)> = rows.into_iter().map(|r| (r.0, r.2)).collect();
    let pair = RatePair {
        spanning: growth_rate_bounds(&spanning, method, None)?,
        separated: growth_rate_bounds(&separated, method, None)?,
    };
    Ok(ScaleRun { scale: *delta, pair, spanning, separated })
}
