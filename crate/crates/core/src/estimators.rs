//! Ladder regressions turning scale quantities into upper metric mean
//! dimension estimates, and two-sided probe reports for the equalities
//! between them.

use serde::Serialize;

use crate::bowen::BowenQuery;
use crate::covering::{self, BoundType, ConstraintSet, CountBound, KernelConfig, Mode};
use crate::cp::{critical_exponent, CpKind, CpSearch, CriticalExponent};
use crate::error::{Error, Result};
use crate::par;
use crate::pressure::{construction_entropy, growth_rate_bounds, pressure_at_scale, RateMethod, ScaleRun, DEFAULT_WINDOW};
use crate::rational::{serde_q, to_f64, Q};
use crate::stable_sets::{block_stable_sample, dispersion_series, truncated_stable_sample, Dispersion, Engine};
use crate::systems::{Point, Potential, SampleCloud, SystemSpec};

pub const MIN_RUNGS: usize = 4;
pub const DEFAULT_TOLERANCE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    MdimUpper,
    MdimWithPotential,
    TailMdim,
    PreimageMdim,
    LocalBowenMdim,
    CpBowenMdim,
    CpPackingMdim,
    StableSetMdim,
    StableSetEntropyMdim,
    StableSetCpMdim,
    PreimageStableMdim,
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::MdimUpper => "mdim_upper",
            Quantity::MdimWithPotential => "mdim_with_potential",
            Quantity::TailMdim => "tail_mdim",
            Quantity::PreimageMdim => "preimage_mdim",
            Quantity::LocalBowenMdim => "local_bowen_mdim",
            Quantity::CpBowenMdim => "cp_bowen_mdim",
            Quantity::CpPackingMdim => "cp_packing_mdim",
            Quantity::StableSetMdim => "stable_set_mdim",
            Quantity::StableSetEntropyMdim => "stable_set_entropy_mdim",
            Quantity::StableSetCpMdim => "stable_set_cp_mdim",
            Quantity::PreimageStableMdim => "preimage_stable_mdim",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rung {
    #[serde(with = "serde_q")]
    pub scale: Q,
    pub rate_upper: f64,
    pub rate_lower: f64,
    pub bound_types: Vec<BoundType>,
    /// Index into the base-point sample of the maximizing point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maximizer: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MdimReport {
    pub quantity: Quantity,
    pub ladder: Vec<Rung>,
    pub slope_upper: f64,
    pub slope_lower: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<(usize, usize)>,
    pub caveats: Vec<String>,
    /// Some rung rests on an indeterminate critical-exponent search.
    pub indeterminate: bool,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
}

impl MdimReport {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.slope_upper + self.slope_lower)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.slope_lower - 1e-12 <= v && v <= self.slope_upper + 1e-12
    }

    pub fn overlaps(&self, other: &MdimReport) -> bool {
        self.slope_lower <= other.slope_upper + 1e-12 && other.slope_lower <= self.slope_upper + 1e-12
    }

    pub fn width(&self) -> f64 {
        self.slope_upper - self.slope_lower
    }
}

/// Options shared by every estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimation {
    pub window: (usize, usize),
    pub mode: Mode,
    pub method: RateMethod,
    pub cfg: KernelConfig,
    pub search: CpSearch,
    pub s_bracket: (f64, f64),
}

impl Default for Estimation {
    fn default() -> Self {
        Estimation {
            window: DEFAULT_WINDOW,
            mode: Mode::Greedy,
            method: RateMethod::EndpointSlope,
            cfg: KernelConfig::default(),
            search: CpSearch::default(),
            s_bracket: (-4.0, 12.0),
        }
    }
}

/// `ε₀, ε₀/2, …` with `rungs` entries.
pub fn geometric_ladder(start: Q, rungs: usize) -> Vec<Q> {
    (0..rungs).map(|i| start / Q::from_integer(1 << i)).collect()
}

pub fn validate_ladder(ladder: &[Q]) -> Result<()> {
    if ladder.len() < MIN_RUNGS {
        return Err(Error::LadderTooShort { rungs: ladder.len(), min: MIN_RUNGS });
    }
    let zero = Q::from_integer(0);
    let one = Q::from_integer(1);
    if ladder.iter().any(|e| *e <= zero || *e >= one) {
        return Err(Error::InvalidConfig("ladder scales must lie in (0, 1)".into()));
    }
    if ladder.windows(2).any(|w| w[1] * Q::from_integer(2) != w[0]) {
        return Err(Error::InvalidConfig("ladder must halve at every rung".into()));
    }
    Ok(())
}

/// Least-squares slope through the origin of `rate` against `ln(1/scale)`.
pub fn slope_through_origin(points: &[(f64, f64)]) -> f64 {
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    sxy / sxx
}

fn assemble(quantity: Quantity, ladder: Vec<Rung>, window: Option<(usize, usize)>, caveats: Vec<String>) -> MdimReport {
    let xs: Vec<f64> = ladder.iter().map(|r| -to_f64(&r.scale).ln()).collect();
    let up: Vec<(f64, f64)> = xs.iter().zip(&ladder).map(|(x, r)| (*x, r.rate_upper)).collect();
    let lo: Vec<(f64, f64)> = xs.iter().zip(&ladder).map(|(x, r)| (*x, r.rate_lower)).collect();
    MdimReport {
        quantity,
        slope_upper: slope_through_origin(&up),
        slope_lower: slope_through_origin(&lo),
        ladder,
        window,
        caveats,
        indeterminate: false,
        seed: None,
        config_hash: None,
    }
}

fn rung_from_run(run: &ScaleRun, maximizer: Option<usize>) -> Rung {
    Rung {
        scale: run.scale,
        rate_upper: run.pair.upper(),
        rate_lower: run.pair.lower(),
        bound_types: vec![run.pair.spanning.bound_type, run.pair.separated.bound_type],
        maximizer,
    }
}

/// On finite systems, moves `window` past the transient so that `d_n`
/// is constant on it and rounds its length up to a multiple of the period.
pub fn stabilized_window(sys: &SystemSpec, window: (usize, usize)) -> ((usize, usize), Option<String>) {
    let Some(f) = sys.as_finite() else {
        return (window, None);
    };
    let (n0, period) = f.eventual_regime();
    let start = window.0.max(n0).max(1);
    let width = (window.1 - window.0).max(1).div_ceil(period) * period;
    let out = (start, start + width);
    if out == window {
        (window, None)
    } else {
        (out, Some(format!("window moved to [{}, {}] past the transient", out.0, out.1)))
    }
}

fn stabilized_grid(sys: &SystemSpec, search: &CpSearch) -> (CpSearch, Option<String>) {
    let Some(f) = sys.as_finite() else {
        return (search.clone(), None);
    };
    let n0 = f.eventual_regime().0;
    match search.n_grid.first() {
        Some(&g0) if g0 < n0 => {
            let grid: Vec<usize> = search.n_grid.iter().map(|g| g + n0 - g0).collect();
            let note = format!("N grid shifted to start at {n0} past the transient");
            (CpSearch { n_grid: grid, ..search.clone() }, Some(note))
        }
        _ => (search.clone(), None),
    }
}

/// Shifts with `f = 0` in greedy mode use product-box constructions.
fn use_construction(sys: &SystemSpec, f: &Potential, mode: Mode) -> bool {
    matches!(sys, SystemSpec::Shift(_)) && f.is_zero() && mode == Mode::Greedy
}

fn engine(sys: &SystemSpec, f: &Potential, mode: Mode) -> Engine {
    if use_construction(sys, f, mode) {
        Engine::Construction
    } else {
        Engine::Cloud(mode)
    }
}

fn construction_note() -> String {
    "counts from product-box constructions on the shift".into()
}

/// Upper metric mean dimension of the cloud with potential `f`.
pub fn mdim_estimate(sys: &SystemSpec, cloud: &SampleCloud, f: &Potential, ladder: &[Q], est: &Estimation) -> Result<MdimReport> {
    validate_ladder(ladder)?;
    let (window, note) = stabilized_window(sys, est.window);
    let mut caveats: Vec<String> = note.into_iter().collect();
    let runs = if use_construction(sys, f, est.mode) {
        caveats.push(construction_note());
        let s = sys.as_shift().unwrap();
        par::try_map(ladder, |e| construction_entropy(s, |_| ConstraintSet::whole(s), e, window, est.method))?
    } else {
        par::try_map(ladder, |e| pressure_at_scale(sys, cloud, f, e, window, est.mode, &est.cfg, est.method))?
    };
    let quantity = if f.is_zero() { Quantity::MdimUpper } else { Quantity::MdimWithPotential };
    Ok(assemble(quantity, runs.iter().map(|r| rung_from_run(r, None)).collect(), Some(window), caveats))
}

/// The cloud with `x` appended when missing.
fn with_point(cloud: &SampleCloud, x: &Point) -> SampleCloud {
    if cloud.points.contains(x) {
        return cloud.clone();
    }
    let mut c = cloud.clone();
    c.points.push(x.clone());
    c.size += 1;
    c
}

fn sample_note(k: usize) -> String {
    format!("sup over X replaced by max over {k} base points, a lower bound of the sup")
}

/// One rung of a dispersion quantity: per-`n` maximum over base points,
/// then growth rates.
#[allow(clippy::too_many_arguments)]
fn dispersion_rung(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    base_points: &[Point],
    eps: &Q,
    delta: &Q,
    window: (usize, usize),
    kind: Dispersion,
    f: &Potential,
    est: &Estimation,
) -> Result<Rung> {
    let eng = engine(sys, f, est.mode);
    let ns: Vec<usize> = (window.0..=window.1).collect();
    let per_point = par::try_map(base_points, |x| {
        let c = with_point(cloud, x);
        ns.iter()
            .map(|&n| match dispersion_series(sys, &c, x, eps, delta, (n, n), kind, f, eng, &est.cfg) {
                Ok(mut rows) => Ok(rows.pop()),
                Err(Error::EmptyNeighborhood(_)) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let best = |pick: &dyn Fn(&crate::stable_sets::DispersionRow) -> &CountBound| -> Result<(Vec<(usize, CountBound)>, usize)> {
        let mut series = Vec::new();
        let mut arg = 0;
        for (k, &n) in ns.iter().enumerate() {
            let mut top: Option<(usize, &CountBound)> = None;
            for (i, rows) in per_point.iter().enumerate() {
                if let Some(r) = &rows[k] {
                    let b = pick(r);
                    if top.is_none_or(|(_, t)| b.log_value > t.log_value) {
                        top = Some((i, b));
                    }
                }
            }
            let Some((i, b)) = top else {
                return Err(Error::EmptyNeighborhood(format!("every {} family is empty at n = {n}", kind.name())));
            };
            arg = i;
            series.push((n, b.clone()));
        }
        Ok((series, arg))
    };
    let (span, arg) = best(&|r| &r.spanning)?;
    let (sep, _) = best(&|r| &r.separated)?;
    let a = growth_rate_bounds(&span, est.method, None)?;
    let b = growth_rate_bounds(&sep, est.method, None)?;
    Ok(Rung {
        scale: *delta,
        rate_upper: a.value.max(b.value),
        rate_lower: a.value.min(b.value),
        bound_types: vec![a.bound_type, b.bound_type],
        maximizer: Some(arg),
    })
}

#[allow(clippy::too_many_arguments)]
fn dispersion_mdim(
    quantity: Quantity,
    sys: &SystemSpec,
    cloud: &SampleCloud,
    base_points: &[Point],
    eps: &Q,
    ladder: &[Q],
    kind: Dispersion,
    f: &Potential,
    est: &Estimation,
) -> Result<MdimReport> {
    validate_ladder(ladder)?;
    if base_points.is_empty() {
        return Err(Error::InvalidConfig("base-point sample is empty".into()));
    }
    if ladder.iter().any(|d| d >= eps) {
        return Err(Error::InvalidConfig("resolutions must be smaller than the radius".into()));
    }
    let (window, note) = stabilized_window(sys, est.window);
    let mut caveats: Vec<String> = note.into_iter().collect();
    caveats.push(sample_note(base_points.len()));
    if use_construction(sys, f, est.mode) {
        caveats.push(construction_note());
    }
    let rungs = ladder
        .iter()
        .map(|d| dispersion_rung(sys, cloud, base_points, eps, d, window, kind, f, est))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(quantity, rungs, Some(window), caveats))
}

/// Upper tail metric mean dimension at radius `eps` over a `δ` ladder.
pub fn tail_mdim(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    base_points: &[Point],
    eps: &Q,
    ladder: &[Q],
    est: &Estimation,
) -> Result<MdimReport> {
    dispersion_mdim(Quantity::TailMdim, sys, cloud, base_points, eps, ladder, Dispersion::TailBall, &Potential::zero(), est)
}

/// Preimage-neighborhood metric mean dimension at radius `eps`.
pub fn preimage_mdim(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    base_points: &[Point],
    eps: &Q,
    ladder: &[Q],
    est: &Estimation,
) -> Result<MdimReport> {
    if !sys.supports_preimages() {
        return Err(Error::PreimagesUnsupported(sys.label()));
    }
    dispersion_mdim(Quantity::PreimageMdim, sys, cloud, base_points, eps, ladder, Dispersion::PreimageOfBall, &Potential::zero(), est)
}

fn cp_rung(ce: &CriticalExponent, scale: Q) -> Rung {
    Rung { scale, rate_upper: ce.bracket.1, rate_lower: ce.bracket.0, bound_types: vec![ce.bound_type], maximizer: None }
}

fn cp_quantity(kind: CpKind) -> Quantity {
    match kind {
        CpKind::Bowen => Quantity::CpBowenMdim,
        CpKind::Packing => Quantity::CpPackingMdim,
    }
}

/// Critical exponents along the ladder, regressed against `ln(1/ε)`. The
/// bisection brackets become the upper and lower rate curves.
pub fn cp_mdim(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    f: &Potential,
    ladder: &[Q],
    kind: CpKind,
    est: &Estimation,
) -> Result<MdimReport> {
    validate_ladder(ladder)?;
    let (search, note) = stabilized_grid(sys, &est.search);
    let ces = par::try_map(ladder, |e| critical_exponent(sys, cloud, kind, e, f, est.s_bracket, &search, est.mode, &est.cfg))?;
    let rungs = ces.iter().zip(ladder).map(|(c, e)| cp_rung(c, *e)).collect();
    let mut r = assemble(cp_quantity(kind), rungs, None, note.into_iter().collect());
    if ces.iter().any(|c| c.indeterminate) {
        r.indeterminate = true;
        r.caveats.push("indeterminate critical-exponent classification".into());
    }
    Ok(r)
}

/// Minimum over neighborhood radii of the CP Bowen estimate on
/// `cloud ∩ B̄(x, r)`; an upper bound of the infimum over neighborhoods.
pub fn local_bowen_mdim(
    sys: &SystemSpec,
    cloud: &SampleCloud,
    x: &Point,
    f: &Potential,
    radii: &[Q],
    ladder: &[Q],
    est: &Estimation,
) -> Result<MdimReport> {
    if radii.is_empty() {
        return Err(Error::InvalidConfig("radius ladder is empty".into()));
    }
    let mut best: Option<(Q, MdimReport)> = None;
    for r in radii {
        let nb = crate::bowen::ball_members(sys, cloud, x, &BowenQuery::closed(1, *r))?;
        if nb.is_empty() {
            return Err(Error::EmptyNeighborhood(crate::rational::format_q(r)));
        }
        let rep = cp_mdim(sys, &nb, f, ladder, CpKind::Bowen, est)?;
        if best.as_ref().is_none_or(|(_, b)| rep.slope_upper < b.slope_upper) {
            best = Some((*r, rep));
        }
    }
    let (r, mut rep) = best.unwrap();
    rep.quantity = Quantity::LocalBowenMdim;
    rep.caveats.push(format!(
        "minimum over {} neighborhood radii attained at r = {}, an upper bound of the infimum",
        radii.len(),
        crate::rational::format_q(&r)
    ));
    Ok(rep)
}

/// One rung of the chain `M_{3ε} ≤ 𝒫_ε + ln3·||f|| ≤ Q(ε) + ln3·||f||`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainCheck {
    #[serde(with = "serde_q")]
    pub epsilon: Q,
    pub bowen_3eps: (f64, f64),
    pub packing: (f64, f64),
    pub separated_rate: f64,
    pub shift: f64,
    pub holds: bool,
}

pub fn cp_chain(sys: &SystemSpec, cloud: &SampleCloud, f: &Potential, eps: &Q, est: &Estimation) -> Result<ChainCheck> {
    let (search, _) = stabilized_grid(sys, &est.search);
    let three = *eps * Q::from_integer(3);
    let b = critical_exponent(sys, cloud, CpKind::Bowen, &three, f, est.s_bracket, &search, est.mode, &est.cfg)?;
    let p = critical_exponent(sys, cloud, CpKind::Packing, eps, f, est.s_bracket, &search, est.mode, &est.cfg)?;
    // Q over the same lengths the CP sums saw.
    let window = (search.n_grid[0], search.n_grid[search.n_grid.len() - 1] + search.span);
    let q = pressure_at_scale(sys, cloud, f, eps, window, est.mode, &est.cfg, est.method)?;
    let shift = 3f64.ln() * f.sup_norm(sys);
    let tol = est.search.tolerance;
    let holds = b.bracket.0 <= p.bracket.1 + shift + tol && p.bracket.0 <= q.pair.separated.value + tol;
    Ok(ChainCheck { epsilon: *eps, bowen_3eps: b.bracket, packing: p.bracket, separated_rate: q.pair.separated.value, shift, holds })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TheoremId {
    #[serde(rename = "T1.1")]
    T11,
    #[serde(rename = "T1.2")]
    T12,
    #[serde(rename = "T1.3")]
    T13,
    #[serde(rename = "T4.1")]
    T41,
    #[serde(rename = "C4.3-fixed-metric")]
    C43,
}

impl TheoremId {
    pub fn name(&self) -> &'static str {
        match self {
            TheoremId::T11 => "T1.1",
            TheoremId::T12 => "T1.2",
            TheoremId::T13 => "T1.3",
            TheoremId::T41 => "T4.1",
            TheoremId::C43 => "C4.3-fixed-metric",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim().trim_start_matches(['T', 't']);
        match t {
            "1.1" => Ok(TheoremId::T11),
            "1.2" => Ok(TheoremId::T12),
            "1.3" => Ok(TheoremId::T13),
            "4.1" => Ok(TheoremId::T41),
            "C4.3" | "c4.3" | "4.3" | "C4.3-fixed-metric" => Ok(TheoremId::C43),
            _ => Err(Error::InvalidConfig(format!("unknown theorem {text:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Consistent,
    InconsistentAtScale,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremParams {
    #[serde(with = "serde_q")]
    pub epsilon: Q,
    pub block: (usize, usize),
    pub depth: usize,
    pub base_points: Vec<Point>,
    #[serde(with = "crate::rational::serde_q::vec")]
    pub ladder: Vec<Q>,
    #[serde(skip)]
    pub f: Potential,
    pub est: Estimation,
    pub tolerance: f64,
    /// Largest `n` of the exact-mode subset-monotonicity checks.
    pub hard_n_max: usize,
    /// Number of leading cloud points used by those checks.
    pub hard_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleRow {
    #[serde(with = "serde_q")]
    pub scale: Q,
    pub left_upper: f64,
    pub left_lower: f64,
    pub right_upper: f64,
    pub right_lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardCheck {
    pub checks: usize,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyReport {
    pub theorem_id: TheoremId,
    pub left: MdimReport,
    pub right: MdimReport,
    /// Further quantities entering the comparison.
    pub others: Vec<MdimReport>,
    pub table: Vec<ScaleRow>,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub hard: HardCheck,
    pub verdict: Verdict,
    pub caveats: Vec<String>,
}

/// Per-rung maximum over base-point reports, with the maximizer recorded.
fn rungwise_max(quantity: Quantity, reports: &[MdimReport], caveats: Vec<String>) -> MdimReport {
    let rungs = (0..reports[0].ladder.len())
        .map(|k| {
            let (i, top) = reports
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.ladder[k].rate_upper.total_cmp(&b.1.ladder[k].rate_upper).then(b.0.cmp(&a.0)))
                .unwrap();
            let lower = reports.iter().map(|r| r.ladder[k].rate_lower).fold(f64::NEG_INFINITY, f64::max);
            Rung { rate_lower: lower, maximizer: Some(i), ..top.ladder[k].clone() }
        })
        .collect();
    let mut r = assemble(quantity, rungs, reports[0].window, caveats);
    r.indeterminate = reports.iter().any(|r| r.indeterminate);
    r
}

fn block_entropy_report(sys: &SystemSpec, cloud: &SampleCloud, x: &Point, p: &TheoremParams) -> Result<MdimReport> {
    let (m, n) = p.block;
    let est = &p.est;
    let (window, note) = stabilized_window(sys, est.window);
    let mut caveats: Vec<String> = note.into_iter().collect();
    let runs = if use_construction(sys, &p.f, est.mode) {
        caveats.push(construction_note());
        let s = sys.as_shift().unwrap();
        let w = x.as_word().unwrap();
        par::try_map(&p.ladder, |d| construction_entropy(s, |_| ConstraintSet::block(w, p.epsilon, m, n), d, window, est.method))?
    } else {
        let fam = block_stable_sample(sys, &with_point(cloud, x), x, &p.epsilon, m, n)?;
        par::try_map(&p.ladder, |d| pressure_at_scale(sys, &fam.members, &p.f, d, window, est.mode, &est.cfg, est.method))?
    };
    Ok(assemble(Quantity::StableSetMdim, runs.iter().map(|r| rung_from_run(r, None)).collect(), Some(window), caveats))
}

fn truncated_cp_report(sys: &SystemSpec, cloud: &SampleCloud, x: &Point, p: &TheoremParams) -> Result<MdimReport> {
    let fam = truncated_stable_sample(sys, &with_point(cloud, x), x, &p.epsilon, p.depth)?;
    let mut r = cp_mdim(sys, &fam.members, &p.f, &p.ladder, CpKind::Bowen, &p.est)?;
    r.caveats.push(format!("stable set truncated at depth {}", p.depth));
    Ok(r)
}

/// Exact-mode subset monotonicity: every block stable family's spanning and
/// separated numbers are at most the whole cloud's.
fn subset_monotonicity(sys: &SystemSpec, cloud: &SampleCloud, p: &TheoremParams) -> Result<HardCheck> {
    let k = p.hard_points.min(cloud.len());
    let small = cloud.select(&(0..k).collect::<Vec<_>>(), "hard");
    let (m, n) = p.block;
    let zero = Potential::zero();
    let mut checks = 0;
    let mut violations = Vec::new();
    for x in small.points.iter().take(p.base_points.len().max(1)) {
        let fam = block_stable_sample(sys, &small, x, &p.epsilon, m, n)?;
        for d in &p.ladder {
            for len in 1..=p.hard_n_max {
                if sys.check_horizon(len, d).is_err() {
                    continue;
                }
                let sub_r = covering::spanning_sum(sys, &fam.members.points, &small.points, len, d, &zero, Mode::Exact, &p.est.cfg)?;
                let all_r = covering::spanning_sum(sys, &small.points, &small.points, len, d, &zero, Mode::Exact, &p.est.cfg)?;
                let sub_s = covering::separated_sum(sys, &fam.members.points, len, d, &zero, Mode::Exact, &p.est.cfg)?;
                let all_s = covering::separated_sum(sys, &small.points, len, d, &zero, Mode::Exact, &p.est.cfg)?;
                checks += 2;
                if !covering::log_le(sub_r.log_value, all_r.log_value) {
                    violations.push(format!("spanning at n = {len}, δ = {}", crate::rational::format_q(d)));
                }
                if !covering::log_le(sub_s.log_value, all_s.log_value) {
                    violations.push(format!("separated at n = {len}, δ = {}", crate::rational::format_q(d)));
                }
            }
        }
    }
    Ok(HardCheck { checks, violations })
}

fn table(left: &MdimReport, right: &MdimReport) -> Result<Vec<ScaleRow>> {
    if left.ladder.len() != right.ladder.len() || left.ladder.iter().zip(&right.ladder).any(|(a, b)| a.scale != b.scale) {
        return Err(Error::MismatchedLadders(format!("{} vs {}", left.quantity.name(), right.quantity.name())));
    }
    Ok(left
        .ladder
        .iter()
        .zip(&right.ladder)
        .map(|(a, b)| ScaleRow {
            scale: a.scale,
            left_upper: a.rate_upper,
            left_lower: a.rate_lower,
            right_upper: b.rate_upper,
            right_lower: b.rate_lower,
        })
        .collect())
}

/// Computes both sides of `theorem` on matching ladders and compares them.
pub fn check_theorem(sys: &SystemSpec, cloud: &SampleCloud, theorem: TheoremId, p: &TheoremParams) -> Result<DiscrepancyReport> {
    validate_ladder(&p.ladder)?;
    if p.base_points.is_empty() {
        return Err(Error::InvalidConfig("base-point sample is empty".into()));
    }
    let est = &p.est;
    let left = mdim_estimate(sys, cloud, &p.f, &p.ladder, est)?;
    let mut caveats = vec![sample_note(p.base_points.len())];
    let mut hard = HardCheck { checks: 0, violations: vec![] };
    let mut others = Vec::new();
    let right = match theorem {
        TheoremId::T11 | TheoremId::C43 => {
            let reps = par::try_map(&p.base_points, |x| block_entropy_report(sys, cloud, x, p))?;
            hard = subset_monotonicity(sys, cloud, p)?;
            if theorem == TheoremId::T11 {
                let i = (0..reps.len()).max_by(|&a, &b| reps[a].midpoint().total_cmp(&reps[b].midpoint()).then(b.cmp(&a))).unwrap();
                let mut r = reps[i].clone();
                r.caveats.push(format!("maximizing base point index {i}"));
                r
            } else {
                rungwise_max(Quantity::StableSetEntropyMdim, &reps, reps[0].caveats.clone())
            }
        }
        TheoremId::T12 => {
            let reps = par::try_map(&p.base_points, |x| truncated_cp_report(sys, cloud, x, p))?;
            rungwise_max(Quantity::StableSetCpMdim, &reps, reps[0].caveats.clone())
        }
        TheoremId::T13 => {
            let mut r = dispersion_mdim(
                Quantity::PreimageStableMdim, sys, cloud, &p.base_points, &p.epsilon, &p.ladder,
                Dispersion::PreimageOfStable { depth: p.depth }, &p.f, est,
            )?;
            r.caveats.push(format!("stable set truncated at depth {}", p.depth));
            r
        }
        TheoremId::T41 => {
            let pre = preimage_mdim(sys, cloud, &p.base_points, &p.epsilon, &p.ladder, est)?;
            others.push(pre);
            tail_mdim(sys, cloud, &p.base_points, &p.epsilon, &p.ladder, est)?
        }
    };
    let tab = table(&left, &right)?;
    for o in &others {
        table(&left, o)?;
    }
    let all: Vec<&MdimReport> = [&left, &right].into_iter().chain(others.iter()).collect();
    let mut discrepancy: f64 = 0.0;
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            discrepancy = discrepancy.max((all[i].midpoint() - all[j].midpoint()).abs());
        }
    }
    let blocked = all.iter().any(|r| r.indeterminate);
    if blocked {
        caveats.push("an input rests on an indeterminate critical-exponent classification".into());
    }
    let verdict = if !hard.violations.is_empty() {
        Verdict::InconsistentAtScale
    } else if blocked {
        Verdict::Inconclusive
    } else if discrepancy <= p.tolerance {
        Verdict::Consistent
    } else {
        Verdict::InconsistentAtScale
    };
    Ok(DiscrepancyReport { theorem_id: theorem, left, right, others, table: tab, discrepancy, tolerance: p.tolerance, hard, verdict, caveats })
}
