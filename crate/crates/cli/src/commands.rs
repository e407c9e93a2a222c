use mixedarea::bodies::SupportBody;
use mixedarea::corpus::corpus;
use mixedarea::conditions::{check_mi, Verdict};
use mixedarea::experiments::{
    bm_second_order_test, bm_segment_test, bm_violation_search, empirical_monotonicity, monotonicity_counterexample,
    monotonicity_test,
    random_nested_pairs, BmForm, BmSearchConfig, HuntConfig,
};
use mixedarea::functionals::{functional_f, FunctionalSpec};
use mixedarea::identities::ibp_symmetry_residual;
use mixedarea::mollify::{mollify_preserves_monotone, sup_distance, MollifierKernel};
use mixedarea::reduction::{cylinder_lemma_residual, dimension_reduction_limit, reduction_grid, DEFAULT_DELTAS};
use mixedarea::specs::{parse_body, parse_flat, parse_function};
use mixedarea::sphere::grid::make_grid;
use mixedarea::Error;
use serde_json::{json, Value};

use crate::context::Context;
use crate::output::{num, Failure, Outcome, Status, Table};

pub type Run = Result<(Value, Outcome), Failure>;

fn body(ctx: &Context, src: &str) -> Result<SupportBody, Failure> {
    Ok(parse_body(src, ctx.n)?)
}

fn node_text(node: &[f64]) -> String {
    node.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" ")
}

/// A hunt that may legitimately come back empty.
fn hunt<T: serde::Serialize>(found: mixedarea::Result<T>) -> Result<Outcome, Failure> {
    match found {
        Ok(value) => Outcome::new(Status::Found, value),
        Err(Error::Search(msg)) => Outcome::new(Status::NotFound, json!({ "message": msg })),
        Err(e) => Err(e.into()),
    }
}

pub fn mi_check(ctx: &Context) -> Run {
    let f = ctx.function()?;
    let i = ctx.order()?;
    let report = check_mi(&f, i, &ctx.grid()?, ctx.tol(&f)?)?;
    let mut table = Table::new(&["order", "verdict", "worst_value", "worst_node"]);
    table.push(vec![
        i.to_string(),
        format!("{:?}", report.verdict).to_lowercase(),
        num(report.worst_value),
        node_text(&report.worst_node),
    ]);
    let outcome = Outcome::new(Status::from_pass(report.verdict.holds()), &report)?.with_table(table);
    Ok((ctx.inputs(json!({})), outcome))
}

pub fn mono_test(ctx: &Context, pairs: Option<usize>) -> Run {
    let f = ctx.function()?;
    let i = ctx.order()?;
    let count = ctx.pick(pairs, "pairs", 20)?;
    let nested = random_nested_pairs(ctx.n, count, ctx.seed)?;
    let report = monotonicity_test(&f, i, &nested, &ctx.grid()?, ctx.tol(&f)?)?;
    let mut table = Table::new(&["inner", "outer", "f_inner", "f_outer", "gap", "tolerance", "violation"]);
    for p in &report.pairs {
        table.push(vec![
            p.inner.clone(),
            p.outer.clone(),
            num(p.f_inner.value),
            num(p.f_outer.value),
            num(p.gap),
            num(p.tolerance),
            p.violation.to_string(),
        ]);
    }
    let outcome = Outcome::new(Status::from_pass(report.violations == 0), &report)?.with_table(table);
    Ok((ctx.inputs(json!({ "pairs": count })), outcome))
}

pub fn mono_hunt(ctx: &Context) -> Run {
    let f = ctx.function()?;
    let i = ctx.order()?;
    let found = monotonicity_counterexample(&f, i, &ctx.grid()?, ctx.tol(&f)?, &HuntConfig::default());
    let table = match &found {
        Ok(c) => {
            let mut t = Table::new(&["delta", "kappa", "step", "gap", "tolerance", "note"]);
            for s in &c.sweep {
                let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
                t.push(vec![num(s.delta), num(s.kappa), opt(s.step), opt(s.gap), opt(s.tolerance), s.note.clone()]);
            }
            t
        }
        Err(_) => Table::new(&["delta", "kappa", "step", "gap", "tolerance", "note"]),
    };
    Ok((ctx.inputs(json!({})), hunt(found)?.with_table(table)))
}

pub fn bm_test(ctx: &Context, inner: &str, outer: &str, t: Option<usize>) -> Run {
    let f = ctx.function()?;
    let i = ctx.order()?;
    let t_count = ctx.pick(t, "t", 21)?;
    let (k, l) = (body(ctx, inner)?, body(ctx, outer)?);
    let probe = bm_segment_test(&f, i, &k, &l, &ctx.grid()?, t_count, ctx.tol(&f)?)?;
    let pass = match probe.form {
        BmForm::Power => probe.concave == Some(true),
        BmForm::Min => probe.bm_min,
    };
    let mut table = Table::new(&["t", "value", "coarse_value", "error_estimate"]);
    for (tk, v) in probe.t_samples.iter().zip(&probe.values) {
        table.push(vec![num(*tk), num(v.value), num(v.coarse_value), num(v.error_estimate)]);
    }
    let outcome = Outcome::new(Status::from_pass(pass), &probe)?.with_table(table);
    Ok((ctx.inputs(json!({ "K": inner, "L": outer, "t": t_count })), outcome))
}

pub fn bm2_test(ctx: &Context, body_src: Option<&str>, phi: Option<&str>, search: bool) -> Run {
    let f = ctx.function()?;
    let i = ctx.order()?;
    let (grid, tol) = (ctx.grid()?, ctx.tol(&f)?);
    if search {
        let found = bm_violation_search(&f, i, &grid, tol, &BmSearchConfig::default());
        let mut table = Table::new(&["delta", "rho", "eps", "f_value", "criterion", "tolerance", "non_concave", "note"]);
        if let Ok(v) = &found {
            let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
            for p in &v.sweep {
                table.push(vec![
                    num(p.delta),
                    num(p.rho),
                    num(p.eps),
                    opt(p.f_value),
                    opt(p.criterion),
                    opt(p.tolerance),
                    p.non_concave.map(|b| b.to_string()).unwrap_or_default(),
                    p.note.clone(),
                ]);
            }
        }
        return Ok((ctx.inputs(json!({ "search": true })), hunt(found)?.with_table(table)));
    }
    let body_src = body_src.ok_or_else(|| Failure::Usage("bm2-test needs --K and --phi, or --search".into()))?;
    let phi_src = phi.ok_or_else(|| Failure::Usage("bm2-test needs --phi".into()))?;
    let k = body(ctx, body_src)?;
    let phi = parse_function(phi_src, ctx.n)?;
    let report = bm_second_order_test(&f, i, &k, &phi, &grid, None, tol)?;
    let outcome = Outcome::new(Status::from_pass(report.holds()), &report)?;
    Ok((ctx.inputs(json!({ "K": body_src, "phi": phi_src })), outcome))
}

pub fn eval(ctx: &Context, body_src: &str) -> Run {
    let f = ctx.function()?;
    let i = ctx.order()?;
    let grid = ctx.grid()?;
    let k = body(ctx, body_src)?;
    let value = functional_f(&FunctionalSpec::new(f, i)?, &k, &grid)?;
    let record = json!({
        "value": value.value,
        "coarse_value": value.coarse_value,
        "error_estimate": value.error_estimate,
        "grid": grid.id(),
        "convention_factor": 1.0,
    });
    Ok((ctx.inputs(json!({ "K": body_src })), Outcome::new(Status::Passed, record)?))
}

/// Verdict text matching the JSON spelling.
pub fn verdict_text(v: Verdict) -> String {
    format!("{v:?}").to_lowercase()
}

pub fn mollify(ctx: &Context, k: Option<f64>, samples: Option<usize>, check: Option<usize>) -> Run {
    let f = ctx.function()?;
    let k = ctx.pick(k, "k", 8.0)?;
    let samples = ctx.pick(samples, "samples", 400)?;
    let grid = ctx.grid()?;
    let kernel = MollifierKernel::new(ctx.n, k, samples, ctx.seed)?;
    let smooth = kernel.apply(&f)?;
    let distance = sup_distance(&f, &smooth, &grid)?;
    let condition = match check {
        Some(i) if i < 1 || i >= ctx.n => {
            return Err(Failure::Usage(format!("--check-mi must lie in 1..={}, got {i}", ctx.n - 1)))
        }
        Some(i) => Some(mollify_preserves_monotone(&f, i, &kernel, &grid, ctx.tol(&smooth)?)?),
        None => None,
    };
    let pass = condition.as_ref().is_none_or(|c| c.verdict.holds());
    let result = json!({
        "k": k,
        "samples": samples,
        "acceptance_rate": kernel.acceptance_rate,
        "max_rotation_distance": kernel.max_distance(),
        "sup_distance": distance,
        "condition": condition,
    });
    let inputs = ctx.inputs(json!({ "k": k, "samples": samples, "check_mi": check }));
    Ok((inputs, Outcome::new(Status::from_pass(pass), result)?))
}

pub fn ibp_check(ctx: &Context, body_src: &str, phi_src: &str) -> Run {
    let f = ctx.function()?;
    let i = ctx.order()?;
    let k = body(ctx, body_src)?;
    let phi = parse_function(phi_src, ctx.n)?;
    let report = ibp_symmetry_residual(&f, &phi, &k, i, &ctx.grid()?)?;
    let result = json!({ "report": report, "tolerance": report.tolerance(), "passes": report.passes() });
    let inputs = ctx.inputs(json!({ "K": body_src, "phi": phi_src }));
    Ok((inputs, Outcome::new(Status::from_pass(report.passes()), result)?))
}

/// Relative agreement demanded of the reduction experiments.
const REDUCTION_TOLERANCE: f64 = 0.02;

fn deltas(ctx: &Context, flag: Option<&str>) -> Result<Vec<f64>, Failure> {
    let d = ctx.list(flag, "deltas", &DEFAULT_DELTAS)?;
    if d.len() < 2 {
        return Err(Failure::Usage("--deltas needs at least two thicknesses".into()));
    }
    Ok(d)
}

fn min_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn cylinder_check(ctx: &Context, planar: &str, radius: Option<f64>, delta_flag: Option<&str>) -> Run {
    let f = ctx.function_or("const:1")?;
    let radius = ctx.pick(radius, "R", 1.0)?;
    let d = deltas(ctx, delta_flag)?;
    let k1 = parse_flat(planar, d[0])?;
    let record = cylinder_lemma_residual(&f, &k1, radius, &d, &reduction_grid(min_of(&d))?)?;
    let mut table = Table::new(&["delta", "lhs", "coarse_value", "error_estimate"]);
    for (delta, v) in d.iter().zip(&record.lhs) {
        table.push(vec![num(*delta), num(v.value), num(v.coarse_value), num(v.error_estimate)]);
    }
    let pass = record.relative_residual <= REDUCTION_TOLERANCE;
    let inputs = ctx.inputs(json!({ "K1": planar, "R": radius, "deltas": d }));
    Ok((inputs, Outcome::new(Status::from_pass(pass), &record)?.with_table(table)))
}

pub fn dimred(ctx: &Context, planar: &str, radii_flag: Option<&str>, delta_flag: Option<&str>) -> Run {
    let f = ctx.function_or("const:1")?;
    let radii = ctx.list(radii_flag, "R", &[2.0, 8.0, 32.0])?;
    let d = deltas(ctx, delta_flag)?;
    let k = parse_flat(planar, d[0])?;
    let record = dimension_reduction_limit(&f, &k, &radii, &d, &reduction_grid(min_of(&d))?)?;
    let mut table = Table::new(&["R", "scaled", "error", "relative_error"]);
    for j in 0..record.radii.len() {
        table.push(vec![
            num(record.radii[j]),
            num(record.scaled[j]),
            num(record.errors[j]),
            num(record.relative_errors[j]),
        ]);
    }
    let last = record.relative_errors.last().copied().unwrap_or(f64::INFINITY);
    let pass = last <= REDUCTION_TOLERANCE;
    let inputs = ctx.inputs(json!({ "K": planar, "R": radii, "deltas": d }));
    Ok((inputs, Outcome::new(Status::from_pass(pass), &record)?.with_table(table)))
}

/// (M)_i against the empirical monotonicity verdict for every corpus entry
/// and order; passes when all non-marginal cases agree.
pub fn corpus_run(ctx: &Context, size: Option<usize>, pairs: Option<usize>) -> Run {
    let size = ctx.pick(size, "size", mixedarea::corpus::DEFAULT_SIZE)?;
    let pair_count = ctx.pick(pairs, "pairs", 10)?;
    let seed = if ctx.seed_given { ctx.seed } else { mixedarea::corpus::DEFAULT_SEED };
    let entries = corpus(seed, size)?;
    let hunt_config = HuntConfig::default();
    let mut table = Table::new(&[
        "name", "dim", "order", "verdict", "worst_value", "pair_violations", "counterexample", "monotone", "agrees",
    ]);
    let mut records = Vec::new();
    let (mut compared, mut agreed) = (0usize, 0usize);
    for entry in &entries {
        let f = entry.function();
        let grid = make_grid(entry.dim, ctx.grid_size, 0)?;
        let tol = ctx.tol(f)?;
        let nested = random_nested_pairs(entry.dim, pair_count, seed)?;
        for i in 1..entry.dim {
            let check = check_mi(f, i, &grid, tol)?;
            let emp = empirical_monotonicity(f, i, &nested, &grid, tol, &hunt_config)?;
            let agrees = emp.agrees();
            if let Some(a) = agrees {
                compared += 1;
                agreed += usize::from(a);
            }
            table.push(vec![
                entry.name.clone(),
                entry.dim.to_string(),
                i.to_string(),
                verdict_text(check.verdict),
                num(check.worst_value),
                emp.pair_violations.to_string(),
                emp.counterexample.is_some().to_string(),
                emp.monotone.to_string(),
                agrees.map(|a| a.to_string()).unwrap_or_else(|| "marginal".into()),
            ]);
            records.push(json!({
                "name": entry.name,
                "spec": entry.spec,
                "dim": entry.dim,
                "order": i,
                "condition": check,
                "pair_violations": emp.pair_violations,
                "counterexample_gap": emp.counterexample.as_ref().map(|c| c.gap.value),
                "hunt_error": emp.hunt_error,
                "monotone": emp.monotone,
                "agrees": agrees,
            }));
        }
    }
    let result = json!({
        "seed": seed,
        "size": size,
        "compared": compared,
        "agreed": agreed,
        "records": records,
    });
    let inputs = json!({ "seed": seed, "size": size, "pairs": pair_count, "grid": ctx.grid_size });
    Ok((inputs, Outcome::new(Status::from_pass(agreed == compared), result)?.with_table(table)))
}
