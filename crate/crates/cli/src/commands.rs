use std::f64::consts::PI;
use std::path::Path;

use log::info;
use nalgebra::DVector;
use serde_json::{json, Value};
use ssm_core::continuation::{
    continue_branch, find_initial_equilibrium, Bifurcation, Branch, ContinuationOptions, EquilibriumPoint,
    Termination,
};
use ssm_core::frc::{
    dof_labels, frc_csv, frc_distance, nonauto_for, plot_data, reconstruct_orbit, resample_branch,
    response_period, sweep_frc, FrcPoint, SweepOptions,
};
use ssm_core::model::{build_first_order, MechanicalModel};
use ssm_core::models::model_registry;
use ssm_core::oracle::{
    eligible_points, orbit_registry, project_to_slow_state, spread, validate_points, OrbitGuess, OrbitRequest,
};
use ssm_core::pipeline::{prepare_master, Reduction, ReductionConfig};
use ssm_core::poly::C64;
use ssm_core::reduced::{coordinate_registry, ReducedVectorField, Representation, SlowState};
use ssm_core::spectral::{mode_table, outer_resonance_margin, solve_spectrum, MasterSubspace, Rational};

use crate::args::*;
use crate::config::parse_pairs;
use crate::output::{emit_json, emit_raw, emit_text, Failure, Header};

type Res<T> = Result<T, Failure>;

pub struct Ctx {
    pub header: Header,
    pub quiet: bool,
}

impl Ctx {
    fn say(&self, line: &str) {
        if !self.quiet {
            eprintln!("{line}");
        }
    }
}

pub fn dispatch(cmd: &Command, ctx: &Ctx) -> Res<()> {
    match cmd {
        Command::Model(ModelCommand::Gen(a)) => model_gen(a, ctx),
        Command::Model(ModelCommand::List(a)) => model_list(a, ctx),
        Command::Eig(a) => eig(a, ctx),
        Command::Resonance(a) => resonance(a, ctx),
        Command::Ssm(a) => ssm(a, ctx),
        Command::Frc(a) => frc(a, ctx),
        Command::Oracle(a) => oracle(a, ctx),
        Command::Validate(a) => validate(a, ctx),
        Command::Converge(a) => converge(a, ctx),
    }
}

fn model_gen(a: &GenArgs, ctx: &Ctx) -> Res<()> {
    let gen = model_registry().get(&a.name)?;
    let params = parse_pairs(&a.params, a.params_json.as_deref()).map_err(Failure::usage)?;
    let model = gen.generate(&Value::Object(params))?;
    emit_json(a.output.output.as_deref(), &ctx.header, model.to_json())
}

fn model_list(a: &OutputArgs, ctx: &Ctx) -> Res<()> {
    let list: Vec<Value> = model_registry()
        .iter()
        .map(|g| json!({ "name": g.name(), "description": g.description(), "defaults": g.defaults() }))
        .collect();
    emit_json(a.output.as_deref(), &ctx.header, json!({ "generators": list }))
}

pub fn load_model(m: &ModelArgs) -> Res<MechanicalModel> {
    if let Some(name) = m.model.strip_prefix("builtin:") {
        let gen = model_registry().get(name)?;
        let params = parse_pairs(&[], m.model_params.as_deref().or(Some("{}"))).map_err(Failure::usage)?;
        return Ok(gen.generate(&Value::Object(params))?);
    }
    if m.model_params.is_some() {
        return Err(Failure::usage("--model-params applies to builtin models only"));
    }
    let text =
        std::fs::read_to_string(&m.model).map_err(|e| Failure::usage(format!("cannot read model {}: {e}", m.model)))?;
    Ok(MechanicalModel::from_json_str(&text)?)
}

fn eig(a: &EigArgs, ctx: &Ctx) -> Res<()> {
    let model = load_model(&a.model)?;
    let sys = build_first_order(&model);
    let spectrum = solve_spectrum(&sys, a.count.unwrap_or(model.n).min(model.n))?;
    let rows = mode_table(&spectrum);
    let out = a.output.output.as_deref();
    if a.format == "json" {
        return emit_json(out, &ctx.header, json!({ "modes": rows }));
    }
    let mut body = String::from("index re_lambda im_lambda damping_ratio\n");
    for r in &rows {
        body.push_str(&format!("{} {:.16e} {:.16e} {:.16e}\n", r.index, r.re, r.im, r.damping_ratio));
    }
    emit_text(out, &ctx.header, &[], &body)
}

pub fn parse_range(s: &str) -> Res<(f64, f64)> {
    let parse = |x: &str| x.trim().parse::<f64>().map_err(|_| Failure::usage(format!("bad range '{s}', expected LO:HI")));
    let (lo, hi) = s.split_once(':').ok_or_else(|| Failure::usage(format!("bad range '{s}', expected LO:HI")))?;
    let (lo, hi) = (parse(lo)?, parse(hi)?);
    if !(lo < hi) {
        return Err(Failure::usage(format!("range '{s}' must satisfy LO < HI")));
    }
    Ok((lo, hi))
}

pub fn parse_orders(s: &str) -> Res<Vec<u32>> {
    let bad = || Failure::usage(format!("bad orders '{s}', expected FIRST:LAST:STEP"));
    let parts: Vec<u32> = s.split(':').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Res<_>>()?;
    let (first, last, step) = match parts[..] {
        [f, l] => (f, l, 2),
        [f, l, st] => (f, l, st),
        _ => return Err(bad()),
    };
    if step == 0 || first < 2 || first > last {
        return Err(bad());
    }
    Ok((first..=last).step_by(step as usize).collect())
}

fn reduction_config(r: &ReductionArgs, model: &MechanicalModel, omega_default: Option<f64>) -> Res<ReductionConfig> {
    if r.master.is_empty() {
        return Err(Failure::usage("--master is required"));
    }
    let omega_ref = match r.omega_ref.or(omega_default) {
        Some(w) => w,
        None => {
            let spectrum = solve_spectrum(&build_first_order(model), model.n)?;
            let mode = spectrum
                .modes
                .get(r.master[0])
                .ok_or_else(|| Failure::usage(format!("master ordinal {} out of range", r.master[0])))?;
            mode.lambda.im.abs()
        }
    };
    let mut cfg = ReductionConfig::new(&r.master, r.order, omega_ref);
    cfg.max_res_order = r.max_res_order;
    cfg.res_tol = r.res_tol;
    cfg.max_denominator = r.max_denominator;
    Ok(cfg)
}

fn build_reduction(r: &ReductionArgs, model: &MechanicalModel, omega_default: Option<f64>) -> Res<Reduction> {
    let cfg = reduction_config(r, model, omega_default)?;
    Ok(Reduction::build(model, &cfg)?)
}

fn complex_pair(z: C64) -> Value {
    json!([z.re, z.im])
}

fn rationals(r: &[Rational]) -> Value {
    Value::Array(r.iter().map(|x| Value::String(x.to_string())).collect())
}

fn master_json(master: &MasterSubspace) -> Value {
    let sets: Vec<Value> = master
        .resonance_sets
        .iter()
        .map(|set| Value::Array(set.iter().map(|(l, j)| json!({ "l": l, "j": j })).collect()))
        .collect();
    json!({
        "master": master.modes.iter().map(|p| p.index).collect::<Vec<_>>(),
        "lambdas": master.lambdas().into_iter().map(complex_pair).collect::<Vec<_>>(),
        "tolerance": master.tolerance,
        "max_order": master.max_order,
        "resonance_sets": sets,
        "r": master.external.as_deref().map(rationals),
        "period_divisor": master.period_divisor().map(|d| d.to_string()),
    })
}

fn resonance(a: &ReductionArgs, ctx: &Ctx) -> Res<()> {
    let model = load_model(&a.model)?;
    let cfg = reduction_config(a, &model, None)?;
    let spectrum = solve_spectrum(&build_first_order(&model), model.n)?;
    let master = prepare_master(&spectrum, &cfg)?;
    let mut doc = master_json(&master);
    doc["omega_ref"] = json!(cfg.omega_ref);
    doc["outer_resonance_margin"] = json!(outer_resonance_margin(&master, master.max_order));
    emit_json(a.output.output.as_deref(), &ctx.header, doc)
}

fn ssm(a: &SsmArgs, ctx: &Ctx) -> Res<()> {
    let model = load_model(&a.reduction.model)?;
    let red = build_reduction(&a.reduction, &model, None)?;
    let ssm = &red.ssm;
    let gamma: Vec<Value> = ssm
        .gamma
        .iter()
        .map(|terms| {
            Value::Array(
                terms.iter().map(|((l, j), c)| json!({ "l": l, "j": j, "re": c.re, "im": c.im })).collect(),
            )
        })
        .collect();
    let mut summary = Vec::new();
    for d in 1..=ssm.order {
        let range = ssm.basis.degree_range(d);
        let nonzero = range.clone().filter(|&k| ssm.w[k].iter().any(|c| c.norm() > 0.0)).count();
        let largest = range.clone().map(|k| ssm.w[k].iter().map(|c| c.norm()).fold(0.0, f64::max)).fold(0.0, f64::max);
        summary.push(json!({ "degree": d, "monomials": range.len(), "nonzero": nonzero, "max_abs_coefficient": largest }));
    }
    let mut doc = json!({
        "order": ssm.order,
        "m": ssm.m,
        "reduction": master_json(&red.master),
        "gamma": gamma,
        "w_summary": summary,
    });
    if a.coefficients {
        let coeffs: Vec<Value> = (0..ssm.basis.len())
            .filter(|&k| ssm.w[k].iter().any(|c| c.norm() > 0.0))
            .map(|k| {
                json!({
                    "exponents": ssm.basis.exps(k),
                    "values": ssm.w[k].iter().map(|c| complex_pair(*c)).collect::<Vec<_>>(),
                })
            })
            .collect();
        doc["w"] = Value::Array(coeffs);
    }
    emit_json(a.reduction.output.output.as_deref(), &ctx.header, doc)
}

/// Reads `{"coords", "values"}`, possibly nested under `"projection"`.
fn read_guess(path: &Path) -> Res<SlowState> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let g = doc.get("projection").unwrap_or(&doc);
    let coords = g.get("coords").and_then(Value::as_str).unwrap_or("cartesian");
    let repr = coordinate_registry().get(coords)?.representation();
    let values: Vec<f64> = g
        .get("values")
        .and_then(Value::as_array)
        .and_then(|v| v.iter().map(Value::as_f64).collect())
        .ok_or_else(|| Failure::usage(format!("{}: 'values' must be a list of numbers", path.display())))?;
    if values.is_empty() || !values.len().is_multiple_of(2) {
        return Err(Failure::usage(format!("{}: expected 2m values", path.display())));
    }
    Ok(SlowState::new(repr, DVector::from_vec(values)))
}

pub struct FrcRun {
    pub rvf: ReducedVectorField,
    pub branch: Branch,
    pub backward: Option<Termination>,
    pub points: Vec<FrcPoint>,
    pub dofs: Vec<usize>,
}

/// Continues from `seed` towards both range ends, unless it sits on one.
fn continue_both(
    rvf: &ReducedVectorField,
    repr: Representation,
    range: (f64, f64),
    seed: &EquilibriumPoint,
    opts: &ContinuationOptions,
) -> Res<(Branch, Option<Termination>)> {
    let tol = 1e-12 * range.1.abs().max(1.0);
    let up = ContinuationOptions { direction: 1.0, ..opts.clone() };
    let down = ContinuationOptions { direction: -1.0, ..opts.clone() };
    if seed.omega <= range.0 + tol {
        return Ok((continue_branch(rvf, repr, range, seed, &up)?, None));
    }
    if seed.omega >= range.1 - tol {
        let mut b = continue_branch(rvf, repr, range, seed, &down)?;
        b.points.reverse();
        return Ok((b, None));
    }
    let fwd = continue_branch(rvf, repr, range, seed, &up)?;
    if fwd.termination == Termination::ClosedLoop {
        return Ok((fwd, None));
    }
    let back = continue_branch(rvf, repr, range, seed, &down)?;
    let mut points: Vec<EquilibriumPoint> = back.points.into_iter().skip(1).rev().collect();
    for p in &mut points {
        p.arclength = -p.arclength;
    }
    points.extend(fwd.points);
    Ok((Branch { points, ..fwd }, Some(back.termination)))
}

pub fn run_frc(model: &MechanicalModel, red: &Reduction, b: &BranchArgs, keep_orbits: bool) -> Res<FrcRun> {
    let (lo, hi) = parse_range(&b.omega_range)?;
    let repr = coordinate_registry().get(&b.coords)?.representation();
    let seed_omega = b.seed_omega.unwrap_or(lo);
    if !(lo..=hi).contains(&seed_omega) {
        return Err(Failure::usage(format!("--seed-omega {seed_omega} lies outside {lo}:{hi}")));
    }
    let dofs: Vec<usize> = if b.dofs.is_empty() { (0..model.n).collect() } else { b.dofs.clone() };
    if let Some(d) = dofs.iter().find(|&&d| d >= model.n) {
        return Err(Failure::usage(format!("DOF index {d} outside 0..{}", model.n)));
    }
    let rvf = red.field(seed_omega, b.epsilon)?;
    let guess = b.seed_guess.as_deref().map(read_guess).transpose()?;
    if let Some(g) = &guess {
        if g.m() != red.master.m() {
            return Err(Failure::usage(format!("seed guess has {} modes, master set has {}", g.m(), red.master.m())));
        }
    }
    let seed = find_initial_equilibrium(&rvf, repr, &b.seed_strategy, guess.as_ref())?;
    info!(target: "continuation", "seed at omega = {seed_omega}: rho = {:?}", seed.state.rho());
    let opts = ContinuationOptions { h_max: b.h_max, max_steps: b.max_steps, ..Default::default() };
    let (mut branch, backward) = continue_both(&rvf, repr, (lo, hi), &seed, &opts)?;
    if let Some(count) = b.resample {
        let grid: Vec<f64> = match count {
            0 => Vec::new(),
            1 => vec![0.5 * (lo + hi)],
            n => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
        };
        branch.points = resample_branch(&rvf, &branch, &grid);
    }
    let mut sopts = SweepOptions::new(&dofs);
    sopts.samples = b.samples;
    sopts.skip_x0 = b.skip_x0;
    sopts.keep_orbits = keep_orbits;
    let points = sweep_frc(red, &rvf, &branch, &sopts);
    Ok(FrcRun { rvf, branch, backward, points, dofs })
}

fn branch_notes(red: &Reduction, run: &FrcRun) -> Vec<String> {
    let r: Vec<String> = run.rvf.r_exact.iter().map(|x| x.to_string()).collect();
    let mut notes = vec![
        format!("order {}, master {:?}, r = [{}]", red.config.order, red.config.master, r.join(", ")),
        format!(
            "{} points, {} saddle-node, {} Hopf, termination {}",
            run.points.len(),
            run.branch.count(Bifurcation::SaddleNode),
            run.branch.count(Bifurcation::Hopf),
            run.branch.termination
        ),
    ];
    if let Some(t) = &run.backward {
        notes.push(format!("backward termination {t}"));
    }
    let failed = run.points.iter().filter(|p| p.error.is_some()).count();
    if failed > 0 {
        notes.push(format!("{failed} points without amplitudes"));
    }
    notes
}

fn frc(a: &FrcArgs, ctx: &Ctx) -> Res<()> {
    let model = load_model(&a.reduction.model)?;
    let (lo, hi) = parse_range(&a.branch.omega_range)?;
    let red = build_reduction(&a.reduction, &model, Some(0.5 * (lo + hi)))?;
    let run = run_frc(&model, &red, &a.branch, false)?;
    let notes = branch_notes(&red, &run);
    let mut comments = ctx.header.lines();
    comments.extend(notes.iter().cloned());
    let labels = dof_labels(&run.dofs);
    let csv = frc_csv(&run.points, red.master.m(), &labels, &comments);
    emit_raw(a.reduction.output.output.as_deref(), &csv)?;
    if let Some(p) = &a.plot_data {
        emit_raw(Some(p), &plot_data(&run.points, &labels, &comments))?;
    }
    if let Some(p) = &a.summary {
        let bifurcations: Vec<Value> = run
            .points
            .iter()
            .filter(|p| p.bifurcation != Bifurcation::None)
            .map(|p| json!({ "omega": p.omega, "kind": p.bifurcation.label(), "rho": p.rho }))
            .collect();
        let doc = json!({
            "points": run.points.len(),
            "saddle_nodes": run.branch.count(Bifurcation::SaddleNode),
            "hopf": run.branch.count(Bifurcation::Hopf),
            "termination": run.branch.termination,
            "backward_termination": run.backward,
            "r": rationals(&run.rvf.r_exact),
            "omega_min": run.points.iter().map(|p| p.omega).fold(f64::INFINITY, f64::min),
            "omega_max": run.points.iter().map(|p| p.omega).fold(f64::NEG_INFINITY, f64::max),
            "failed_points": run.points.iter().filter(|p| p.error.is_some()).count(),
            "bifurcations": bifurcations,
        });
        emit_json(Some(p), &ctx.header, doc)?;
    }
    for n in &notes {
        ctx.say(n);
    }
    Ok(())
}

struct CsvRow {
    omega: f64,
    epsilon: f64,
    state: SlowState,
}

/// Data row `ROW` (zero-based, after the header) of an FRC CSV.
fn read_csv_row(arg: &str) -> Res<CsvRow> {
    let (file, row) = arg
        .rsplit_once(':')
        .and_then(|(f, r)| r.parse::<usize>().ok().map(|r| (f, r)))
        .ok_or_else(|| Failure::usage(format!("--seed-from '{arg}' is not FILE:ROW")))?;
    let text = std::fs::read_to_string(file).map_err(|e| Failure::usage(format!("{file}: {e}")))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| Failure::usage(format!("{file}: no header")))?.split(',').collect();
    let data: Vec<&str> = lines
        .nth(row)
        .ok_or_else(|| Failure::usage(format!("{file}: no data row {row}")))?
        .split(',')
        .collect();
    let col = |name: &str| -> Res<f64> {
        let i = header.iter().position(|h| *h == name).ok_or_else(|| Failure::usage(format!("{file}: no column {name}")))?;
        data.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| Failure::usage(format!("{file}: bad value in {name}")))
    };
    let m = header.iter().filter(|h| h.starts_with("rho_")).count();
    let q: Vec<C64> = (1..=m)
        .map(|i| Ok(C64::from_polar(col(&format!("rho_{i}"))?, col(&format!("theta_{i}"))?)))
        .collect::<Res<_>>()?;
    Ok(CsvRow { omega: col("omega")?, epsilon: col("epsilon")?, state: SlowState::from_modal(Representation::Polar, &q) })
}

fn oracle(a: &OracleArgs, ctx: &Ctx) -> Res<()> {
    let model = load_model(&a.reduction.model)?;
    let row = a.seed_from.as_deref().map(read_csv_row).transpose()?;
    let omega = a.omega.or(row.as_ref().map(|r| r.omega)).ok_or_else(|| Failure::usage("--omega or --seed-from is required"))?;
    let epsilon =
        a.epsilon.or(row.as_ref().map(|r| r.epsilon)).ok_or_else(|| Failure::usage("--epsilon or --seed-from is required"))?;
    let red = if a.reduction.master.is_empty() {
        if row.is_some() {
            return Err(Failure::usage("--seed-from needs the --master and --order of the FRC run"));
        }
        None
    } else {
        Some(build_reduction(&a.reduction, &model, Some(omega))?)
    };
    let rvf = red.as_ref().map(|r| r.field(omega, epsilon)).transpose()?;
    let period = match &red {
        Some(r) => response_period(r.master.period_divisor().unwrap_or(Rational::from_integer(1)), omega),
        None => 2.0 * PI * a.period_multiple as f64 / omega,
    };
    let guess = match (&red, &rvf, &row) {
        (Some(red), Some(rvf), Some(row)) => {
            let na = nonauto_for(red, rvf, false)?;
            OrbitGuess { states: reconstruct_orbit(&red.ssm, &na, rvf, &row.state, period, a.samples).states }
        }
        _ => OrbitGuess::constant(DVector::zeros(2 * model.n)),
    };
    let req = OrbitRequest {
        samples: a.samples,
        intervals: a.intervals,
        max_periods: a.max_periods,
        steady_tol: a.steady_tol,
        ..OrbitRequest::new(omega, epsilon).with_period(period)
    };
    let solver = orbit_registry().get(&a.method)?;
    let orbit = solver.solve(&model, &req, &guess)?;
    let mut doc = json!({
        "omega": orbit.omega,
        "epsilon": orbit.epsilon,
        "period": orbit.period,
        "method": solver.name(),
        "residual_norm": orbit.residual_norm,
        "stable": orbit.stable(),
        "periods": orbit.periods,
        "multipliers": orbit.multipliers.iter().map(|z| complex_pair(*z)).collect::<Vec<_>>(),
        "amplitudes": (0..model.n).map(|d| orbit.amplitude(d)).collect::<Vec<_>>(),
        "times": orbit.times,
        "states": orbit.samples.iter().map(|z| z.as_slice().to_vec()).collect::<Vec<_>>(),
    });
    if let (Some(red), Some(rvf)) = (&red, &rvf) {
        let s = project_to_slow_state(&orbit, &red.master, &red.sys.b, &rvf.r, Representation::Cartesian);
        doc["projection"] = json!({ "coords": "cartesian", "values": s.values.as_slice(), "rho": s.rho() });
    }
    emit_json(a.reduction.output.output.as_deref(), &ctx.header, doc)?;
    ctx.say(&format!(
        "{} orbit at omega = {omega}: residual {:.3e}, stable {:?}",
        solver.name(),
        orbit.residual_norm,
        orbit.stable()
    ));
    Ok(())
}

fn validate(a: &ValidateArgs, ctx: &Ctx) -> Res<()> {
    let model = load_model(&a.reduction.model)?;
    let (lo, hi) = parse_range(&a.branch.omega_range)?;
    let red = build_reduction(&a.reduction, &model, Some(0.5 * (lo + hi)))?;
    let solver = orbit_registry().get(&a.method)?;
    let run = run_frc(&model, &red, &a.branch, true)?;
    let eligible = eligible_points(&run.points, a.floor, a.margin);
    let picks = spread(&run.points, &eligible, a.points);
    let refs: Vec<&FrcPoint> = picks.iter().map(|&i| &run.points[i]).collect();
    let records = validate_points(&model, &refs, &run.dofs, solver.as_ref());
    let ok = |r: &ssm_core::oracle::ValidationRecord| {
        r.error.is_none() && r.max_relative_error() <= a.tol && r.stability_agrees()
    };
    let passed = records.iter().filter(|r| ok(r)).count();
    let entries: Vec<Value> = records
        .iter()
        .map(|r| {
            let mut v = serde_json::to_value(r).expect("records serialize");
            v["max_relative_error"] = json!(r.max_relative_error());
            v["stability_agrees"] = json!(r.stability_agrees());
            v["pass"] = json!(ok(r));
            v
        })
        .collect();
    let doc = json!({
        "method": solver.name(),
        "tol": a.tol,
        "eligible": eligible.len(),
        "sampled": records.len(),
        "requested": a.points,
        "passed": passed,
        "dofs": run.dofs,
        "records": entries,
    });
    emit_json(a.reduction.output.output.as_deref(), &ctx.header, doc)?;
    for r in &records {
        match &r.error {
            Some(e) => ctx.say(&format!("omega {:.6}: oracle failed: {e} (FAIL)", r.omega)),
            None => ctx.say(&format!(
                "omega {:.6}: max relative error {:.3e}, stability {} ({})",
                r.omega,
                r.max_relative_error(),
                if r.stability_agrees() { "agrees" } else { "differs" },
                if ok(r) { "pass" } else { "FAIL" }
            )),
        }
    }
    if records.len() < a.points {
        return Err(Failure::validation(format!("only {} of {} requested points are eligible", records.len(), a.points)));
    }
    if passed < records.len() {
        return Err(Failure::validation(format!("{} of {} points outside tolerance", records.len() - passed, records.len())));
    }
    Ok(())
}

fn converge(a: &ConvergeArgs, ctx: &Ctx) -> Res<()> {
    let model = load_model(&a.reduction.model)?;
    let orders = parse_orders(&a.orders)?;
    let (lo, hi) = parse_range(&a.branch.omega_range)?;
    let first = ReductionArgs { order: orders[0], ..a.reduction.clone() };
    let base = build_reduction(&first, &model, Some(0.5 * (lo + hi)))?;
    let mut prev: Option<Vec<FrcPoint>> = None;
    let mut steps = Vec::new();
    let mut converged = None;
    for &o in &orders {
        let red = if o == base.config.order { base.clone() } else { base.at_order(o)? };
        let run = run_frc(&model, &red, &a.branch, false)?;
        let change = prev.as_ref().map(|p| frc_distance(&run.points, p));
        ctx.say(&format!(
            "order {o}: {} points{}",
            run.points.len(),
            change.map(|c| format!(", change {c:.3e}")).unwrap_or_default()
        ));
        steps.push(json!({
            "order": o,
            "points": run.points.len(),
            "saddle_nodes": run.branch.count(Bifurcation::SaddleNode),
            "hopf": run.branch.count(Bifurcation::Hopf),
            "change": change,
        }));
        if change.is_some_and(|c| c <= a.tol) {
            converged = Some(o);
            break;
        }
        prev = Some(run.points);
    }
    let doc = json!({ "tol": a.tol, "orders": steps, "converged_order": converged });
    emit_json(a.reduction.output.output.as_deref(), &ctx.header, doc)?;
    match converged {
        Some(o) => {
            ctx.say(&format!("converged at order {o}"));
            Ok(())
        }
        None => Err(Failure::validation(format!("FRC did not converge to {} over orders {:?}", a.tol, orders))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_orders() {
        assert_eq!(parse_range("0.98:1.02").unwrap(), (0.98, 1.02));
        assert!(parse_range("1:1").is_err());
        assert!(parse_range("x").is_err());
        assert_eq!(parse_orders("3:9:2").unwrap(), vec![3, 5, 7, 9]);
        assert_eq!(parse_orders("3:6").unwrap(), vec![3, 5]);
        assert!(parse_orders("3:9:0").is_err());
    }
}
