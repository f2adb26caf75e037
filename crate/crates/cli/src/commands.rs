use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use hetnet_core::approx::{fit_piecewise, verify_lower_bound, CERT_GRID_POINTS, PRESET_M5};
use hetnet_core::association::{branch_and_bound, solve_with, DEFAULT_ENUMERATION_LIMIT};
use hetnet_core::model::{gen_synthetic, SyntheticParams};
use hetnet_core::montecarlo::{demand_stress, validate as mc_validate, StressRow};
use hetnet_core::robust::Formulation;
use hetnet_core::{
    AssocStrategy, Association, BnbOptions, PiecewiseApprox, RobustConfig, Scenario, SolveResult, SolverOptions,
    UncertaintyBox,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::options::{BnbArgs, FitArgs, GenArgs, Mode, ProblemArgs, SolveArgs, SweepArgs, ValidateArgs};
use crate::output::{sibling, write_csv, write_json, write_manifest, write_text};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::from_json(&read(path)?).with_context(|| format!("loading scenario {}", path.display()))
}

fn parse_pair(text: &str, what: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(',').collect();
    match parts.as_slice() {
        [a, b] => Ok((a.trim().parse().context(what.to_string())?, b.trim().parse().context(what.to_string())?)),
        _ => bail!("{what}: expected <low>,<high>, got {text:?}"),
    }
}

/// `paper-m5`, `fit:<m>,<s_min>,<s_max>` or `file:<path>`.
pub fn parse_approx(spec: &str) -> Result<PiecewiseApprox> {
    if spec == PRESET_M5 {
        return Ok(PiecewiseApprox::preset_m5());
    }
    if let Some(path) = spec.strip_prefix("file:") {
        return Ok(PiecewiseApprox::from_json(&read(Path::new(path))?)?);
    }
    let Some(args) = spec.strip_prefix("fit:") else {
        bail!("--approx: expected paper-m5, fit:<m>,<s_min>,<s_max> or file:<path>, got {spec:?}");
    };
    let parts: Vec<&str> = args.split(',').map(str::trim).collect();
    let [m, lo, hi] = parts.as_slice() else {
        bail!("--approx: fit needs <m>,<s_min>,<s_max>, got {args:?}");
    };
    let m: usize = m.parse().context("--approx: piece count")?;
    Ok(fit_piecewise(m, lo.parse().context("--approx: s_min")?, hi.parse().context("--approx: s_max")?)?)
}

fn parse_assoc(spec: &str) -> Result<AssocStrategy> {
    Ok(match spec {
        "greedy" => AssocStrategy::Greedy,
        "enumerate" => AssocStrategy::Enumerate { limit: DEFAULT_ENUMERATION_LIMIT },
        "bnb" => AssocStrategy::Bnb(BnbOptions::default()),
        other => {
            let Some(path) = other.strip_prefix("fixed:") else {
                bail!("--assoc: expected fixed:<file>, greedy, enumerate or bnb, got {other:?}");
            };
            let text = read(Path::new(path))?;
            // Either a bare association or a previous result.
            let assoc = serde_json::from_str::<Association>(&text)
                .or_else(|_| serde_json::from_str::<SolveResult>(&text).map(|r| r.assoc))
                .with_context(|| format!("--assoc: {path} holds neither an association nor a result"))?;
            AssocStrategy::Fixed(assoc)
        }
    })
}

struct Problem {
    formulation: Formulation,
    uncertainty: Option<UncertaintyBox>,
}

fn build_problem(p: &ProblemArgs, sigma_override: Option<f64>, alpha: f64) -> Result<Problem> {
    let mut sc = load_scenario(&p.scenario)?;
    if let Some(s) = sigma_override.or(p.sigma) {
        sc = sc.with_uniform_sigma(s);
    }
    let cfg = RobustConfig { alpha, sigma_scale: p.sigma_scale, policy: p.box_policy };
    let sc = sc.with_sigma_scale(cfg.sigma_scale);
    let pw = parse_approx(&p.approx)?;
    Ok(match p.mode {
        Mode::Deterministic => Problem { formulation: Formulation::deterministic(sc, pw)?, uncertainty: None },
        Mode::Robust => {
            let bx = cfg.uncertainty_box(sc.n, sc.n_bs)?;
            Problem { formulation: Formulation::robust(sc, pw, bx.clone())?, uncertainty: Some(bx) }
        }
    })
}

pub fn gen(a: &GenArgs, argv: &[String]) -> Result<ExitCode> {
    let sc = gen_synthetic(&SyntheticParams {
        n: a.n,
        n_bs: a.bs,
        area_m: a.area,
        sigma_db: a.sigma,
        demand_min_bps: a.demand_min,
        demand_max_bps: a.demand_max,
        bandwidth_hz: a.bandwidth,
        p_max_w: a.p_max,
        noise_w: a.noise,
        seed: a.seed,
        ..Default::default()
    })?;
    write_text(&a.out, &(sc.to_json() + "\n"))?;
    write_manifest(argv, "gen", Some(a.seed), &[&a.out])?;
    println!("wrote {} (n={}, N={}, seed={})", a.out.display(), sc.n, sc.n_bs, a.seed);
    Ok(ExitCode::SUCCESS)
}

pub fn fit(a: &FitArgs, argv: &[String]) -> Result<ExitCode> {
    let pw = parse_approx(&a.approx)?;
    let (lo, hi) = match &a.range {
        Some(r) => parse_pair(r, "--range")?,
        None => (pw.s_min, pw.s_max),
    };
    let report = verify_lower_bound(&pw, lo, hi, CERT_GRID_POINTS);
    write_text(&a.out, &(pw.to_json() + "\n"))?;
    write_manifest(argv, "fit", None, &[&a.out])?;
    println!(
        "pieces={} range=[{lo}, {hi}] certified={} max_excess={:.3e} at s={:.6e}",
        pw.m(),
        report.pass,
        report.max_excess,
        report.worst_sinr
    );
    Ok(ExitCode::SUCCESS)
}

pub fn solve(a: &SolveArgs, argv: &[String]) -> Result<ExitCode> {
    let problem = build_problem(&a.problem, None, a.problem.alpha)?;
    let strategy = parse_assoc(&a.assoc)?;
    let result = solve_with(&problem.formulation, &strategy, &SolverOptions::default())?;
    write_json(&a.out, &result)?;
    let mut outputs = vec![a.out.as_path()];
    if let (Some(path), Some(bx)) = (&a.box_out, &problem.uncertainty) {
        write_json(path, bx)?;
        outputs.push(path);
    }
    write_manifest(argv, "solve", None, &outputs)?;
    println!("objective_w={} status={:?}", result.objective, result.status);
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct UserRow {
    user_id: String,
    violation_pct: f64,
    outside_box_pct: Option<f64>,
}

#[derive(Serialize)]
struct ValidateSummary<'a> {
    scenario: String,
    result: String,
    box_file: Option<String>,
    sigma_scale: f64,
    report: &'a hetnet_core::ViolationReport,
    stress: &'a [StressRow],
}

pub fn validate(a: &ValidateArgs, argv: &[String]) -> Result<ExitCode> {
    let sc = load_scenario(&a.scenario)?.with_sigma_scale(a.sigma_scale);
    let result: SolveResult = serde_json::from_str(&read(&a.result)?).context("parsing result")?;
    result.check_shape(&sc).context("result does not fit the scenario")?;
    let bx = match &a.box_file {
        Some(p) => Some(UncertaintyBox::from_json(&read(p)?)?),
        None => None,
    };
    let report = mc_validate(&result, &sc, &a.dist, a.samples, a.seed, bx.as_ref())?;

    let pct = |f: f64| 100.0 * f;
    let mut rows: Vec<UserRow> = report
        .per_user_violation
        .iter()
        .enumerate()
        .map(|(i, &v)| UserRow {
            user_id: i.to_string(),
            violation_pct: pct(v),
            outside_box_pct: report.per_user_outside_box.as_ref().map(|o| pct(o[i])),
        })
        .collect();
    rows.push(UserRow {
        user_id: "all".into(),
        violation_pct: pct(report.overall_violation),
        outside_box_pct: report.overall_outside_box.map(pct),
    });
    write_csv(&a.out, &rows)?;

    let stress = if a.stress.is_empty() {
        Vec::new()
    } else {
        demand_stress(&result, &sc, &a.dist, &a.stress, a.samples, a.seed)?
    };
    let summary_path = sibling(&a.out, "json");
    write_json(
        &summary_path,
        &ValidateSummary {
            scenario: a.scenario.display().to_string(),
            result: a.result.display().to_string(),
            box_file: a.box_file.as_ref().map(|p| p.display().to_string()),
            sigma_scale: a.sigma_scale,
            report: &report,
            stress: &stress,
        },
    )?;
    let mut outputs = vec![a.out.as_path(), summary_path.as_path()];
    let stress_path = sibling(&a.out, "stress.csv");
    if !stress.is_empty() {
        write_csv(&stress_path, &stress)?;
        outputs.push(&stress_path);
    }
    write_manifest(argv, "validate", Some(a.seed), &outputs)?;
    println!(
        "violation_pct={} outside_box_pct={} samples={}",
        pct(report.overall_violation),
        report.overall_outside_box.map_or("n/a".to_string(), |f| pct(f).to_string()),
        a.samples
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize)]
struct SweepRow {
    axis: &'static str,
    sigma_db: Option<f64>,
    probability: f64,
    objective_w: Option<f64>,
    status: String,
}

pub fn sweep(a: &SweepArgs, argv: &[String]) -> Result<ExitCode> {
    if a.sigmas.is_empty() && a.probs.is_empty() {
        bail!("sweep needs --sigmas and/or --probs");
    }
    let strategy = parse_assoc(&a.assoc)?;
    let mut points: Vec<(&'static str, Option<f64>, f64)> = a.sigmas.iter().map(|&s| ("sigma", Some(s), a.prob)).collect();
    points.extend(a.probs.iter().map(|&p| ("probability", a.at_sigma.or(a.problem.sigma), p)));

    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.workers).build()?;
    let rows: Vec<SweepRow> = pool.install(|| {
        points
            .par_iter()
            .map(|&(axis, sigma, prob)| {
                let solved = build_problem(&a.problem, sigma, 1.0 - prob)
                    .and_then(|p| Ok(solve_with(&p.formulation, &strategy, &SolverOptions::default())?));
                let (objective_w, status) = match solved {
                    Ok(r) => (Some(r.objective), "optimal".to_string()),
                    Err(e) if e.downcast_ref::<hetnet_core::Error>().is_some_and(|c| c.is_infeasible()) => {
                        (None, "infeasible".to_string())
                    }
                    Err(e) => (None, format!("error: {e:#}")),
                };
                SweepRow { axis, sigma_db: sigma, probability: prob, objective_w, status }
            })
            .collect()
    });
    write_csv(&a.out, &rows)?;
    write_manifest(argv, "sweep", None, &[&a.out])?;
    for r in &rows {
        println!(
            "{} sigma={} p={} objective_w={} {}",
            r.axis,
            r.sigma_db.map_or("scenario".to_string(), |s| s.to_string()),
            r.probability,
            r.objective_w.map_or("-".to_string(), |o| o.to_string()),
            r.status
        );
    }
    if rows.iter().any(|r| r.objective_w.is_some()) {
        Ok(ExitCode::SUCCESS)
    } else if rows.iter().all(|r| r.status == "infeasible") {
        Ok(ExitCode::from(2))
    } else {
        Ok(ExitCode::FAILURE)
    }
}

pub fn bnb(a: &BnbArgs, argv: &[String]) -> Result<ExitCode> {
    let problem = build_problem(&a.problem, None, a.problem.alpha)?;
    let opts = BnbOptions { node_limit: a.node_limit, rel_gap: a.rel_gap };
    let out = branch_and_bound(&problem.formulation, &SolverOptions::default(), &opts)?;
    write_json(&a.out, &out)?;
    write_manifest(argv, "bnb", None, &[&a.out])?;
    println!(
        "objective_w={} gap={:e} certified={} nodes={}",
        out.result.objective, out.gap, out.certified, out.nodes
    );
    Ok(ExitCode::SUCCESS)
}
