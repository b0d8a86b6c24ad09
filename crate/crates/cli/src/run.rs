use gexr_core::constants::{
    estimate_generalized_constant, estimate_generalized_piterbarg, estimate_pickands, estimate_piterbarg, ConvergenceStatus,
    DomainKind, ExtrapolationSchedule, ScheduleResult,
};
use gexr_core::covariance::{DriftFunction, LimitFieldSpec, ThresholdedFamily};
use gexr_core::doublesum::{
    check_bound_conditions, estimate_double_maxima, fit_bound_constant, flat_preset, gaussian_preset, BoundObservation, DoubleMaximaConfig,
};
use gexr_core::families::{berman_family, peak_family, stationary_short_interval, RuinCells};
use gexr_core::functional::FunctionalSpec;
use gexr_core::tailprob::{
    conditional_tail, crude_mc_tail, eval_mainm_formula, eval_pickands_formula, uniform_ratio_audit, ConditionalSampler, MainmConstants,
};
use gexr_core::Estimate;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::*;
use crate::error::{CliError, CliResult};

/// Summary status of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    NoPlateau,
    Diverging,
    LowConfidence,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::NoPlateau => "no-plateau",
            Status::Diverging => "diverging",
            Status::LowConfidence => "low-confidence",
        }
    }
}

/// One CSV cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Num(x) => x.to_string(),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    pub fn to_json(self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Num(x) => json!(x.to_string()),
            Cell::Int(n) => json!(n),
            Cell::Bool(b) => json!(b),
        }
    }
}

/// How the gnuplot script draws the table.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub x: usize,
    pub y: usize,
    pub err: Option<usize>,
    pub log_y: bool,
    pub xlabel: &'static str,
    pub ylabel: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub status: Status,
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
    pub summary: Value,
    pub warnings: Vec<String>,
    pub plot: PlotSpec,
}

pub const CONSTANTS_HEADER: &[&str] = &["level", "step", "value", "stderr", "nReps"];
pub const TAIL_HEADER: &[&str] = &["u", "tau", "pHat", "stderr", "psi", "ratio"];
pub const AUDIT_HEADER: &[&str] = &["u", "maxDeviation", "pass"];
pub const DOUBLESUM_HEADER: &[&str] = &["sep", "S2", "u", "dHat", "stderr", "bound", "slack"];
pub const FORMULA_HEADER: &[&str] = &["u", "value"];
pub const RUIN_HEADER: &[&str] = &["u", "k", "pHat", "stderr", "psi", "ratio"];

/// Run a resolved experiment on `workers` threads (all available when unset).
pub fn execute(r: &Resolved) -> CliResult<Report> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(r.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", r.workers.unwrap_or(0))))?;
    pool.install(|| match &r.params {
        Params::Constants(p) => constants(r, p),
        Params::Tail(p) => tail(r, p),
        Params::Audit(p) => audit(r, p),
        Params::Doublesum(p) => doublesum(r, p),
        Params::Formula(p) => formula(p),
        Params::RuinDemo(p) => ruin_demo(r, p),
    })
}

pub fn build_family(def: &FamilyDef) -> CliResult<ThresholdedFamily> {
    Ok(match *def {
        FamilyDef::Stationary { alpha } => stationary_short_interval(alpha)?,
        FamilyDef::Berman { eps, b, k_max } => berman_family(eps, b, k_max)?,
        FamilyDef::Peak { alpha, beta, p } => peak_family(alpha, beta, p)?.0,
        FamilyDef::Ruin { alpha, c, cell, k_max } => RuinCells::new(alpha, c, cell)?.family(k_max),
    })
}

fn estimate_json(e: &Estimate) -> Value {
    json!({ "value": e.value, "stderr": e.stderr, "nReps": e.n_reps, "ci95": [e.ci95.0, e.ci95.1] })
}

fn constants_row(level: f64, step: f64, e: &Estimate) -> Vec<Cell> {
    vec![Cell::Num(level), Cell::Num(step), Cell::Num(e.value), Cell::Num(e.stderr), Cell::Int(e.n_reps as u64)]
}

fn judge(e: &Estimate, target: Option<Target>) -> Status {
    match target {
        Some(t) if (e.value / t.value - 1.0).abs() > t.rel => Status::Fail,
        _ => Status::Pass,
    }
}

fn limit_status(s: ConvergenceStatus) -> Option<Status> {
    match s {
        ConvergenceStatus::Plateau => None,
        ConvergenceStatus::Diverging => Some(Status::Diverging),
        ConvergenceStatus::NoPlateau | ConvergenceStatus::NotConverged => Some(Status::NoPlateau),
    }
}

fn check_points(r: &Resolved, points: f64) -> CliResult<()> {
    if points > r.budget.grid_points as f64 {
        return Err(CliError::Budget(format!("grid points {points} exceed the budget {} (set {BUDGET_VAR})", r.budget.grid_points)));
    }
    Ok(())
}

fn schedule_report(res: ScheduleResult, target: Option<Target>) -> Report {
    let mut rows: Vec<Vec<Cell>> = res.rows.iter().map(|row| constants_row(row.domain, row.step, &row.value)).collect();
    // step 0 marks the extrapolated values
    rows.extend(res.extrapolated.iter().map(|e| constants_row(e.meta.domain_size, 0.0, e)));
    let status = limit_status(res.status).unwrap_or_else(|| judge(&res.estimate, target));
    Report {
        status,
        header: CONSTANTS_HEADER,
        rows,
        summary: json!({
            "estimate": estimate_json(&res.estimate),
            "finest": estimate_json(&res.finest),
            "convergence": res.status,
            "rate": res.rate,
            "overflow": res.overflow,
            "target": target.map(|t| json!({ "value": t.value, "rel": t.rel })),
        }),
        warnings: res.warnings,
        plot: PlotSpec { x: 1, y: 3, err: Some(4), log_y: false, xlabel: "domain size", ylabel: "level value" },
    }
}

fn constants(r: &Resolved, p: &ConstantsParams) -> CliResult<Report> {
    let n = r.reps();
    match p {
        ConstantsParams::Pickands { limit, schedule, method, target } => {
            let sch = schedule.clone().unwrap_or_default();
            sch.validate()?;
            check_points(r, sch.domain_sizes.last().unwrap() / sch.grid_steps.last().unwrap() + 1.0)?;
            let eta = LimitFieldSpec::from_def(limit)?;
            Ok(schedule_report(estimate_pickands(&eta, &sch, n, r.seed, *method)?, *target))
        }
        ConstantsParams::Piterbarg { limit, drift, domain, schedule, method, target } => {
            let sch = schedule.clone().unwrap_or_default();
            sch.validate()?;
            let sides = if *domain == DomainKind::TwoSided { 2.0 } else { 1.0 };
            check_points(r, sides * sch.domain_sizes.last().unwrap() / sch.grid_steps.last().unwrap() + 1.0)?;
            let eta = LimitFieldSpec::from_def(limit)?;
            let h = DriftFunction::from_def(drift)?;
            Ok(schedule_report(estimate_piterbarg(&eta, &h, *domain, &sch, n, r.seed, *method)?, *target))
        }
        ConstantsParams::Generalized { limit, drift, functional, grid, method, target } => {
            let g = r.grid(grid)?;
            let eta = LimitFieldSpec::from_def(limit)?;
            let h = DriftFunction::from_def(drift)?;
            let gamma = FunctionalSpec::from_def(functional)?;
            let c = estimate_generalized_constant(&eta, &h, &gamma, &g, n, r.seed, *method)?;
            let mut warnings = Vec::new();
            if c.overflow > 0 {
                warnings.push(format!("{} replications produced non-finite values and were discarded", c.overflow));
            }
            Ok(Report {
                status: judge(&c.estimate, *target),
                header: CONSTANTS_HEADER,
                rows: vec![constants_row(grid.hi - grid.lo, grid.step, &c.estimate)],
                summary: json!({
                    "estimate": estimate_json(&c.estimate),
                    "overflow": c.overflow,
                    "target": target.map(|t| json!({ "value": t.value, "rel": t.rel })),
                }),
                warnings,
                plot: PlotSpec { x: 1, y: 3, err: Some(4), log_y: false, xlabel: "domain size", ylabel: "constant" },
            })
        }
        ConstantsParams::GeneralizedPiterbarg { variance, b, s, t_schedule, grid_step, stop_rule, method } => {
            check_points(r, (s + t_schedule.last().unwrap()) / grid_step + 1.0)?;
            let vf = variance.build()?;
            let sch = ExtrapolationSchedule { domain_sizes: t_schedule.clone(), stop_rule: *stop_rule, ..Default::default() };
            let res = estimate_generalized_piterbarg(&vf, *b, *s, &sch, *grid_step, n, r.seed, *method)?;
            let status = if !res.nondecreasing {
                Status::Fail
            } else {
                limit_status(res.status).unwrap_or(Status::Pass)
            };
            let mut warnings = Vec::new();
            if !res.assumptions_hold {
                warnings.push("the variance function is outside the regular-variation assumptions".into());
            }
            Ok(Report {
                status,
                header: CONSTANTS_HEADER,
                rows: res.levels.iter().map(|(t, e)| constants_row(*t, *grid_step, e)).collect(),
                summary: json!({
                    "estimate": estimate_json(&res.estimate),
                    "convergence": res.status,
                    "nondecreasing": res.nondecreasing,
                    "assumptionsHold": res.assumptions_hold,
                    "overflow": res.overflow,
                }),
                warnings,
                plot: PlotSpec { x: 1, y: 3, err: Some(4), log_y: false, xlabel: "T", ylabel: "level value" },
            })
        }
    }
}

fn tail_row(u: f64, tau: f64, est: &Estimate, psi: f64, ratio: f64) -> Vec<Cell> {
    vec![Cell::Num(u), Cell::Num(tau), Cell::Num(est.value), Cell::Num(est.stderr), Cell::Num(psi), Cell::Num(ratio)]
}

fn tail(r: &Resolved, p: &TailParams) -> CliResult<Report> {
    let fam = build_family(&p.family)?;
    let grid = r.grid(&p.grid)?;
    let gamma = FunctionalSpec::from_def(&p.functional)?;
    let sampler = ConditionalSampler::new(fam.clone());
    let mut rows = Vec::with_capacity(p.u.len());
    let mut low = false;
    let mut details = Vec::new();
    for &u in &p.u {
        let t = match p.estimator {
            Estimator::Conditional => conditional_tail(&sampler, u, p.tau, &gamma, &grid, r.reps(), r.seed)?,
            Estimator::Crude => crude_mc_tail(&fam, u, p.tau, &gamma, &grid, r.reps(), r.seed)?,
        };
        low |= t.low_confidence;
        rows.push(tail_row(u, p.tau, &t.estimate, t.psi, t.ratio()));
        details.push(json!({
            "u": u,
            "g": t.g,
            "ratioStderr": t.ratio_stderr(),
            "hits": t.hits,
            "lowConfidence": t.low_confidence,
            "truncationBound": t.truncation_bound,
        }));
    }
    Ok(Report {
        status: if low { Status::LowConfidence } else { Status::Pass },
        header: TAIL_HEADER,
        rows,
        summary: json!({ "family": fam.label(), "estimator": p.estimator, "cells": details }),
        warnings: if low { vec!["some thresholds produced no exceedances; their intervals are one-sided".into()] } else { vec![] },
        plot: PlotSpec { x: 1, y: 3, err: Some(4), log_y: true, xlabel: "u", ylabel: "tail probability" },
    })
}

fn audit(r: &Resolved, p: &AuditParams) -> CliResult<Report> {
    let fam = build_family(&p.family)?;
    let grid = r.grid(&p.grid)?;
    let gamma = FunctionalSpec::from_def(&p.functional)?;
    let constant = match &p.constant {
        ConstantSource::Fixed { value, stderr } => Estimate::new(*value, *stderr, 0),
        ConstantSource::Estimate { limit, drift } => {
            let eta = LimitFieldSpec::from_def(limit)?;
            let h = DriftFunction::from_def(drift)?;
            estimate_generalized_constant(&eta, &h, &gamma, &grid, r.reps(), r.seed, Default::default())?.estimate
        }
    };
    let sampler = ConditionalSampler::new(fam);
    let rep = uniform_ratio_audit(&sampler, &gamma, &constant, &p.u_schedule, &grid, r.reps(), r.seed, p.tolerance)?;
    let rows = rep.rows.iter().map(|row| vec![Cell::Num(row.u), Cell::Num(row.max_deviation), Cell::Bool(row.within_tolerance)]).collect();
    // the per-cell ratios; with a single index this is one ratio per threshold
    let trace: Vec<Value> = rep
        .rows
        .iter()
        .map(|row| {
            json!({
                "u": row.u,
                "cells": row.cells.iter().map(|c| json!({
                    "tau": c.tail.tau, "ratio": c.ratio, "ratioStderr": c.tail.ratio_stderr(), "deviation": c.deviation,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    Ok(Report {
        status: if rep.pass { Status::Pass } else { Status::Fail },
        header: AUDIT_HEADER,
        rows,
        summary: json!({
            "constant": estimate_json(&rep.constant),
            "tolerance": rep.tolerance,
            "decreasing": rep.decreasing,
            "indices": rep.rows.first().map_or(0, |row| row.cells.len()),
            "trace": trace,
        }),
        warnings: vec![],
        plot: PlotSpec { x: 1, y: 2, err: None, log_y: false, xlabel: "u", ylabel: "max relative deviation" },
    })
}

pub fn doublesum_maker(p: DoublesumPreset) -> fn(f64, f64) -> gexr_core::Result<DoubleMaximaConfig> {
    match p {
        DoublesumPreset::Gaussian => gaussian_preset,
        DoublesumPreset::Flat => flat_preset,
    }
}

fn doublesum(r: &Resolved, p: &DoublesumParams) -> CliResult<Report> {
    let make = doublesum_maker(p.preset);
    let mut obs = Vec::new();
    let mut cfgs = Vec::new();
    for &s2 in &p.s2 {
        for &u in &p.u {
            for &sep in &p.separations {
                let cfg = make(sep, s2)?;
                let e = estimate_double_maxima(&cfg, u, p.step, r.reps(), r.seed)?;
                obs.push(BoundObservation::new(&cfg, u, e.estimate));
                cfgs.push((cfg, u));
            }
        }
    }
    let fit = fit_bound_constant(&obs)?;

    let s1_values = p.s1.clone().unwrap_or_else(|| vec![cfgs[0].0.params.s1]);
    let mut sweep = Vec::with_capacity(s1_values.len());
    for &s1 in &s1_values {
        let (mut holds, mut growth) = (true, f64::INFINITY);
        for (cfg, u) in &cfgs {
            let mut c = cfg.clone();
            c.params.s1 = s1;
            let rep = check_bound_conditions(&c, *u, p.step)?;
            holds &= rep.pass;
            growth = growth.min(rep.lower_growth.unwrap_or(f64::INFINITY));
        }
        sweep.push(json!({ "s1": s1, "conditionsHold": holds, "minLowerGrowth": Cell::Num(growth).to_json() }));
    }

    let rows = obs
        .iter()
        .zip(&fit.slack)
        .map(|(o, &slack)| {
            vec![
                Cell::Num(o.separation),
                Cell::Num(o.s2),
                Cell::Num(o.u),
                Cell::Num(o.estimate.value),
                Cell::Num(o.estimate.stderr),
                Cell::Num(fit.fitted_c * o.unit_bound),
                Cell::Num(slack),
            ]
        })
        .collect();
    let mut warnings = Vec::new();
    if fit.unbounded {
        warnings.push("double maxima do not decay with the separation; no finite constant fits the bound".into());
    }
    Ok(Report {
        status: if fit.pass { Status::Pass } else { Status::Fail },
        header: DOUBLESUM_HEADER,
        rows,
        summary: json!({ "fittedC": fit.fitted_c, "pass": fit.pass, "unbounded": fit.unbounded, "s1Sweep": sweep }),
        warnings,
        plot: PlotSpec { x: 1, y: 4, err: Some(5), log_y: true, xlabel: "separation", ylabel: "double maxima probability" },
    })
}

fn formula(p: &FormulaParams) -> CliResult<Report> {
    let rows = match p {
        FormulaParams::Pickands { t, alpha, u, h } => {
            u.iter().map(|&u| Ok(vec![Cell::Num(u), Cell::Num(eval_pickands_formula(*t, *alpha, u, *h)?)])).collect::<CliResult<Vec<_>>>()?
        }
        FormulaParams::Peak { alpha, beta, p, u, pickands } => {
            let (_, setup) = peak_family(*alpha, *beta, *p)?;
            let c = MainmConstants { pickands: vec![*pickands], piterbarg: vec![], h_star: 1.0 };
            u.iter().map(|&u| Ok(vec![Cell::Num(u), Cell::Num(eval_mainm_formula(&setup, u, &c)?)])).collect::<CliResult<Vec<_>>>()?
        }
    };
    Ok(Report {
        status: Status::Pass,
        header: FORMULA_HEADER,
        rows,
        summary: json!({}),
        warnings: vec![],
        plot: PlotSpec { x: 1, y: 2, err: None, log_y: true, xlabel: "u", ylabel: "formula value" },
    })
}

fn ruin_demo(r: &Resolved, p: &RuinParams) -> CliResult<Report> {
    let cells = RuinCells::new(p.alpha, p.c, p.cell)?;
    let fam = cells.family(p.k_max);
    let grid = r.grid(&GridDef { lo: 0.0, hi: p.cell, step: p.grid_step })?;
    let sampler = ConditionalSampler::new(fam.clone());
    let mut rows = Vec::new();
    let mut totals = Vec::new();
    for &u in &p.u {
        let (mut sum, mut var) = (0.0, 0.0);
        for k in fam.index_grid(u) {
            let t = conditional_tail(&sampler, u, k, &FunctionalSpec::Sup, &grid, r.reps(), r.seed)?;
            sum += t.estimate.value;
            var += t.estimate.stderr * t.estimate.stderr;
            rows.push(tail_row(u, k, &t.estimate, t.psi, t.ratio()));
        }
        totals.push(json!({ "u": u, "level": cells.level(u), "cellSum": sum, "stderr": var.sqrt() }));
    }
    Ok(Report {
        status: Status::Pass,
        header: RUIN_HEADER,
        rows,
        summary: json!({ "peak": cells.peak(), "cellSums": totals }),
        warnings: vec![],
        plot: PlotSpec { x: 2, y: 3, err: Some(4), log_y: true, xlabel: "cell k", ylabel: "cell exceedance probability" },
    })
}
