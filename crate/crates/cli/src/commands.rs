use mdim_core::covering::{self, oracle, CountBound, Mode};
use mdim_core::cp::{self, critical_exponent, CpKind};
use mdim_core::estimators::{self, check_theorem, MdimReport, TheoremId, TheoremParams, DEFAULT_TOLERANCE};
use mdim_core::pressure::scale_entropy;
use mdim_core::rational::{format_q, parse_q};
use mdim_core::repro::{self, Property, RWord};
use mdim_core::stable_sets::{self, Dispersion, Engine, Variant};
use mdim_core::systems::SystemSpec;
use mdim_core::{q, Error, Q};
use serde_json::{json, Value};

use crate::config::Resolved;
use crate::output::Record;

/// Everything a subcommand produced. `failure` is reported after the
/// outputs are written.
pub struct Outcome {
    pub name: String,
    pub json: Value,
    pub records: Vec<Record>,
    pub failure: Option<Error>,
}

impl Outcome {
    fn ok(name: &str, json: Value, records: Vec<Record>) -> Self {
        Outcome { name: name.into(), json, records, failure: None }
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn bound_record(base: &Record, quantity: &str, n: usize, b: &CountBound) -> Record {
    Record {
        quantity: quantity.into(),
        n: Some(n),
        bound_type: b.bound_type.name().into(),
        method: b.method.name().into(),
        value: b.log_value,
        ..base.clone()
    }
}

fn stamp(mut r: MdimReport, res: &Resolved) -> MdimReport {
    r.seed = Some(res.seed);
    r.config_hash = Some(res.hash.clone());
    r
}

/// Rows for a report: two rates per rung and the two slopes. `scale_is_delta`
/// puts the rung scale in the `delta` column next to a fixed `epsilon`.
fn report_records(base: &Record, r: &MdimReport, eps: Option<Q>, scale_is_delta: bool, method: &str) -> Vec<Record> {
    let q = r.quantity.name();
    let mut out = Vec::new();
    for rung in &r.ladder {
        let (e, d) = if scale_is_delta { (eps, Some(rung.scale)) } else { (Some(rung.scale), None) };
        let types: Vec<&str> = rung.bound_types.iter().map(|b| b.name()).collect();
        for (side, v) in [("rate_upper", rung.rate_upper), ("rate_lower", rung.rate_lower)] {
            out.push(Record {
                quantity: format!("{q}:{side}"),
                epsilon: e,
                delta: d,
                bound_type: types.join("+"),
                method: method.into(),
                value: v,
                ..base.clone()
            });
        }
    }
    for (side, v) in [("slope_upper", r.slope_upper), ("slope_lower", r.slope_lower)] {
        out.push(Record { quantity: format!("{q}:{side}"), epsilon: if scale_is_delta { eps } else { None }, method: method.into(), value: v, ..base.clone() });
    }
    out
}

fn base_record(sys: &SystemSpec, subset: &str) -> Record {
    Record { system: sys.label(), subset: subset.into(), ..Default::default() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EstimateQuantity {
    Mdim,
    Tail,
    Preimage,
    CpBowen,
    CpPacking,
    LocalBowen,
}

pub fn estimate(res: &Resolved, which: EstimateQuantity) -> Result<Outcome, Error> {
    let sys = res.system()?;
    let cloud = res.cloud(&sys)?;
    let f = res.potential(&sys)?;
    let ladder = res.ladder()?;
    let est = res.estimation();
    let method = est.method.name();
    let base = base_record(&sys, &cloud.subset_label);
    let (report, eps, as_delta) = match which {
        EstimateQuantity::Mdim => (estimators::mdim_estimate(&sys, &cloud, &f, &ladder, &est)?, None, false),
        EstimateQuantity::Tail | EstimateQuantity::Preimage => {
            let eps = res.epsilon()?;
            let pts = res.base_points(&sys, &cloud)?;
            let r = if which == EstimateQuantity::Tail {
                estimators::tail_mdim(&sys, &cloud, &pts, &eps, &ladder, &est)?
            } else {
                estimators::preimage_mdim(&sys, &cloud, &pts, &eps, &ladder, &est)?
            };
            (r, Some(eps), true)
        }
        EstimateQuantity::CpBowen => (estimators::cp_mdim(&sys, &cloud, &f, &ladder, CpKind::Bowen, &est)?, None, false),
        EstimateQuantity::CpPacking => (estimators::cp_mdim(&sys, &cloud, &f, &ladder, CpKind::Packing, &est)?, None, false),
        EstimateQuantity::LocalBowen => {
            let x = res.base_points(&sys, &cloud)?.remove(0);
            (estimators::local_bowen_mdim(&sys, &cloud, &x, &f, &res.radii()?, &ladder, &est)?, None, false)
        }
    };
    let report = stamp(report, res);
    let records = report_records(&base, &report, eps, as_delta, method);
    Ok(Outcome::ok("estimate", to_value(&report), records))
}

pub fn scale_entropy_cmd(res: &Resolved) -> Result<Outcome, Error> {
    let sys = res.system()?;
    let cloud = res.cloud(&sys)?;
    let est = res.estimation();
    let scales = match res.config.epsilon {
        Some(_) => vec![res.epsilon()?],
        None => res.ladder()?,
    };
    let base = base_record(&sys, &cloud.subset_label);
    let mut records = Vec::new();
    let mut runs = Vec::new();
    for e in &scales {
        let run = scale_entropy(&sys, &cloud, e, est.window, est.mode, &est.cfg, est.method)?;
        let b = Record { epsilon: Some(*e), ..base.clone() };
        for (n, c) in &run.spanning {
            records.push(bound_record(&b, "log_spanning", *n, c));
        }
        for (n, c) in &run.separated {
            records.push(bound_record(&b, "log_separated", *n, c));
        }
        for (name, r) in [("rate_spanning", &run.pair.spanning), ("rate_separated", &run.pair.separated)] {
            records.push(Record { quantity: name.into(), bound_type: r.bound_type.name().into(), method: r.method.name().into(), value: r.value, ..b.clone() });
        }
        runs.push(json!({
            "epsilon": format_q(e),
            "rate_spanning": run.pair.spanning,
            "rate_separated": run.pair.separated,
            "spanning": run.spanning.iter().map(|(n, c)| json!({"n": n, "log_value": c.log_value, "bound_type": c.bound_type, "method": c.method})).collect::<Vec<_>>(),
            "separated": run.separated.iter().map(|(n, c)| json!({"n": n, "log_value": c.log_value, "bound_type": c.bound_type, "method": c.method})).collect::<Vec<_>>(),
        }));
    }
    let doc = json!({"quantity": "scale_entropy", "runs": runs, "seed": res.seed, "config_hash": res.hash});
    Ok(Outcome::ok("scale-entropy", doc, records))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum VariantArg {
    Block,
    Truncated,
    TailBall,
    PreimageStable,
    PreimageBall,
}

fn variant(res: &Resolved, v: VariantArg) -> Result<Variant, Error> {
    let depth = res.config.depth.unwrap_or(3);
    Ok(match v {
        VariantArg::Block => {
            let (m, n) = res.config.block.ok_or_else(|| Error::InvalidConfig("config needs `block`".into()))?;
            Variant::Block { m, n }
        }
        VariantArg::Truncated => Variant::Truncated { depth },
        VariantArg::TailBall => Variant::TailBall { n: res.n()? },
        VariantArg::PreimageStable => Variant::PreimageOfStable { n: res.n()?, depth },
        VariantArg::PreimageBall => Variant::PreimageOfBall { n: res.n()? },
    })
}

pub fn stable_set(res: &Resolved, v: VariantArg) -> Result<Outcome, Error> {
    let sys = res.system()?;
    let cloud = res.cloud(&sys)?;
    let eps = res.epsilon()?;
    let x = res.base_points(&sys, &cloud)?.remove(0);
    let fam = stable_sets::realize(&sys, &cloud, &x, &eps, variant(res, v)?, res.kernel().budget)?;
    let failure = fam.verify(&sys).err();
    let disagreements = match fam.symbolic {
        Some(_) => Some(stable_sets::symbolic_disagreements(&sys, &cloud, &fam)?),
        None => None,
    };
    let failure = failure.or_else(|| {
        disagreements.filter(|&d| d > 0).map(|d| Error::InvariantViolation(format!("{d} symbolic disagreements")))
    });
    let base = base_record(&sys, &fam.members.subset_label);
    let records = vec![Record {
        quantity: "family_size".into(),
        epsilon: Some(eps),
        bound_type: "exact".into(),
        method: "filter".into(),
        value: fam.len() as f64,
        ..base
    }];
    let doc = json!({
        "family": fam,
        "size": fam.len(),
        "members": fam.members.points.iter().map(|p| p.to_json()).collect::<Vec<_>>(),
        "verified": failure.is_none(),
        "symbolic_disagreements": disagreements,
        "seed": res.seed,
        "config_hash": res.hash,
    });
    Ok(Outcome { name: "stable-set".into(), json: doc, records, failure })
}

pub fn dispersion(res: &Resolved, v: VariantArg) -> Result<Outcome, Error> {
    let kind = match v {
        VariantArg::TailBall => Dispersion::TailBall,
        VariantArg::PreimageBall => Dispersion::PreimageOfBall,
        VariantArg::PreimageStable => Dispersion::PreimageOfStable { depth: res.config.depth.unwrap_or(3) },
        _ => return Err(Error::InvalidConfig("dispersion needs tail-ball, preimage-ball or preimage-stable".into())),
    };
    let sys = res.system()?;
    let cloud = res.cloud(&sys)?;
    let f = res.potential(&sys)?;
    let eps = res.epsilon()?;
    let delta = res.delta()?;
    let est = res.estimation();
    let x = res.base_points(&sys, &cloud)?.remove(0);
    let engine = if matches!(sys, SystemSpec::Shift(_)) && f.is_zero() && est.mode == Mode::Greedy {
        Engine::Construction
    } else {
        Engine::Cloud(est.mode)
    };
    let rows = stable_sets::dispersion_series(&sys, &cloud, &x, &eps, &delta, est.window, kind, &f, engine, &est.cfg)?;
    let base = Record { epsilon: Some(eps), delta: Some(delta), ..base_record(&sys, kind.name()) };
    let mut records = Vec::new();
    for r in &rows {
        records.push(bound_record(&base, "log_spanning", r.n, &r.spanning));
        records.push(bound_record(&base, "log_separated", r.n, &r.separated));
    }
    let doc = json!({"quantity": kind.name(), "engine": engine, "rows": rows, "seed": res.seed, "config_hash": res.hash});
    Ok(Outcome::ok("dispersion", doc, records))
}

pub fn cp_cmd(res: &Resolved, kind: CpKind) -> Result<Outcome, Error> {
    let sys = res.system()?;
    let cloud = res.cloud(&sys)?;
    let f = res.potential(&sys)?;
    let est = res.estimation();
    let scales = match res.config.epsilon {
        Some(_) => vec![res.epsilon()?],
        None => res.ladder()?,
    };
    let base = base_record(&sys, &cloud.subset_label);
    let mut records = Vec::new();
    let mut out = Vec::new();
    for e in &scales {
        let ce = critical_exponent(&sys, &cloud, kind, e, &f, est.s_bracket, &est.search, est.mode, &est.cfg)?;
        let b = Record { epsilon: Some(*e), bound_type: ce.bound_type.name().into(), method: "bisection".into(), ..base.clone() };
        for (name, v) in [("critical_exponent", ce.value), ("bracket_lower", ce.bracket.0), ("bracket_upper", ce.bracket.1)] {
            records.push(Record { quantity: format!("{}:{name}", kind.name()), value: v, ..b.clone() });
        }
        for p in &ce.probes {
            for (n, v) in ce.n_grid.iter().zip(&p.log_sums) {
                records.push(Record { quantity: format!("{}:log_sum", kind.name()), s: Some(p.s), big_n: Some(*n), value: *v, ..b.clone() });
            }
        }
        out.push(json!({"epsilon": format_q(e), "result": ce}));
    }
    let doc = json!({"kind": kind.name(), "runs": out, "seed": res.seed, "config_hash": res.hash});
    Ok(Outcome::ok("cp", doc, records))
}

pub fn check(res: &Resolved, theorem: &str) -> Result<Outcome, Error> {
    let id = TheoremId::parse(theorem)?;
    let sys = res.system()?;
    let cloud = res.cloud(&sys)?;
    let p = TheoremParams {
        epsilon: res.epsilon()?,
        block: res.config.block.unwrap_or((0, 2)),
        depth: res.config.depth.unwrap_or(3),
        base_points: res.base_points(&sys, &cloud)?,
        ladder: res.ladder()?,
        f: res.potential(&sys)?,
        est: res.estimation(),
        tolerance: res.config.tolerance.unwrap_or(DEFAULT_TOLERANCE),
        hard_n_max: res.config.hard_n_max.unwrap_or(3),
        hard_points: res.config.hard_points.unwrap_or(12),
    };
    let mut report = check_theorem(&sys, &cloud, id, &p)?;
    report.left = stamp(report.left, res);
    report.right = stamp(report.right, res);
    report.others = report.others.into_iter().map(|r| stamp(r, res)).collect();
    let base = Record { epsilon: Some(p.epsilon), ..base_record(&sys, &cloud.subset_label) };
    let method = p.est.method.name();
    let mut records = Vec::new();
    for r in [&report.left, &report.right].into_iter().chain(report.others.iter()) {
        records.extend(report_records(&base, r, Some(p.epsilon), true, method));
    }
    records.push(Record { quantity: format!("{}:discrepancy", id.name()), method: method.into(), value: report.discrepancy, ..base.clone() });
    let failure = (!report.hard.violations.is_empty())
        .then(|| Error::InvariantViolation(format!("subset monotonicity: {}", report.hard.violations.join("; "))));
    let mut doc = to_value(&report);
    doc["seed"] = json!(res.seed);
    doc["config_hash"] = json!(res.hash);
    Ok(Outcome { name: "check".into(), json: doc, records, failure })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Family {
    E1,
    E2,
    E3,
}

pub struct ReproArgs {
    pub family: Family,
    pub epsilon: Option<String>,
    pub delta: Option<String>,
    pub n: Option<usize>,
    pub base_value: String,
    pub points: usize,
}

pub fn repro_cmd(res: &Resolved, a: &ReproArgs) -> Result<Outcome, Error> {
    let pick = |flag: &Option<String>, cfg: &Option<String>, default: Q| -> Result<Q, Error> {
        match flag.as_ref().or(cfg.as_ref()) {
            Some(t) => parse_q(t),
            None => Ok(default),
        }
    };
    let eps = pick(&a.epsilon, &res.config.epsilon, q(1, 2))?;
    let delta = pick(&a.delta, &res.config.delta, q(1, 24))?;
    let n = a.n.or(res.config.n).unwrap_or(2);
    let budget = res.config.budget.unwrap_or(covering::DEFAULT_BUDGET);
    let x = RWord::constant(parse_q(&a.base_value)?);
    let (fam, reports) = match a.family {
        Family::E1 => {
            let fam = repro::construct_e1(n, eps)?;
            let len = n + repro::tail_length(&eps) + 8;
            let cloud = repro::random_words(a.points, len, 3 * 1024, res.seed);
            let r = repro::verify_family(&fam, &Property::Spanning { n, epsilon: eps }, &cloud, budget, res.seed)?;
            (fam, vec![r])
        }
        Family::E2 => {
            let fam = repro::construct_e2(&x, n, eps, delta)?;
            let (short, long) = repro::verify_e2_separation(&fam, budget, res.seed)?;
            let ball = repro::verify_family(&fam, &Property::InBall { center: x.clone(), n, epsilon: eps }, &[], budget, res.seed)?;
            (fam, vec![short, long, ball])
        }
        Family::E3 => {
            let fam = repro::construct_e3(&x, n, delta)?;
            let sep = repro::verify_family(&fam, &Property::Separated { n, delta }, &[], budget, res.seed)?;
            let pre = repro::verify_family(&fam, &Property::Preimage { target: x.clone(), n }, &[], budget, res.seed)?;
            (fam, vec![sep, pre])
        }
    };
    let pass = reports.iter().all(|r| r.pass) && fam.len() == fam.cardinality_formula_value;
    let name = format!("{:?}", fam.name);
    let base = Record {
        system: "rational_shift".into(),
        subset: name.clone(),
        n: Some(n),
        epsilon: fam.epsilon,
        delta: fam.delta,
        bound_type: "exact".into(),
        method: "construction".into(),
        ..Default::default()
    };
    let mut records = vec![
        Record { quantity: "cardinality_formula".into(), value: fam.cardinality_formula_value as f64, ..base.clone() },
        Record { quantity: "cardinality_enumerated".into(), value: fam.len() as f64, ..base.clone() },
    ];
    for r in &reports {
        let label = match &r.property {
            Property::Spanning { .. } => "spanning_pass".to_string(),
            Property::Separated { n, .. } => format!("separated_pass:n={n}"),
            Property::InBall { .. } => "in_ball_pass".to_string(),
            Property::Preimage { .. } => "preimage_pass".to_string(),
        };
        records.push(Record { quantity: label, value: if r.pass { 1.0 } else { 0.0 }, ..base.clone() });
    }
    let doc = json!({
        "family": name,
        "n": n,
        "epsilon": fam.epsilon.map(|e| format_q(&e)),
        "delta": fam.delta.map(|d| format_q(&d)),
        "base_point": fam.base_point,
        "cardinality_formula_value": fam.cardinality_formula_value.to_string(),
        "cardinality_enumerated": fam.len().to_string(),
        "reports": reports,
        "pass": pass,
        "seed": res.seed,
        "config_hash": res.hash,
    });
    let failure = (!pass).then(|| Error::InvariantViolation(format!("{name} verification failed")));
    Ok(Outcome { name: "repro".into(), json: doc, records, failure })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OracleKind {
    Spanning,
    Separated,
    CpBowen,
    CpPacking,
}

pub fn oracle_cmd(res: &Resolved, kind: OracleKind) -> Result<Outcome, Error> {
    let sys = res.system()?;
    let cloud = res.cloud(&sys)?;
    let f = res.potential(&sys)?;
    let eps = res.epsilon()?;
    let (lo, hi) = res.config.window.unwrap_or((1, 4));
    let base = Record { epsilon: Some(eps), bound_type: "exact".into(), method: "brute_force".into(), ..base_record(&sys, &cloud.subset_label) };
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for n in lo..=hi {
        let (v, s) = match kind {
            OracleKind::Spanning => (oracle::spanning_sum(&sys, &cloud.points, &cloud.points, n, &eps, &f)?.unwrap_or(f64::INFINITY), None),
            OracleKind::Separated => (oracle::separated_sum(&sys, &cloud.points, n, &eps, &f)?, None),
            OracleKind::CpBowen | OracleKind::CpPacking => {
                let s = res.config.s.unwrap_or(0.0);
                let span = res.config.span.unwrap_or(2);
                let v = if kind == OracleKind::CpBowen {
                    cp::oracle::bowen_cover_sum(&sys, &cloud, s, n, n + span, &eps, &f)?
                } else {
                    cp::oracle::packing_sum(&sys, &cloud, s, n, n + span, &eps, &f)?
                };
                (v, Some(s))
            }
        };
        let quantity = format!("oracle:{kind:?}").to_lowercase();
        if s.is_some() {
            records.push(Record { quantity, s, big_n: Some(n), value: v, ..base.clone() });
        } else {
            records.push(Record { quantity, n: Some(n), value: v, ..base.clone() });
        }
        rows.push(json!({"n": n, "log_value": v, "s": s}));
    }
    let doc = json!({"oracle": format!("{kind:?}").to_lowercase(), "rows": rows, "seed": res.seed, "config_hash": res.hash});
    Ok(Outcome::ok("oracle", doc, records))
}
