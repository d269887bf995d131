//! Command-line verbs. `main` only parses arguments and maps the outcome
//! to an exit status.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::checks::{self, CheckContext};
use crate::error::{Error, Result};
use crate::flow::{self, DonaldsonFlow, FlowTrajectory, Snapshot, Verdict};
use crate::io;
use crate::scenario::{Scenario, SeriesMode};
use crate::series::{self, Coeff, Exact};
use crate::{bundle::MetricField, destab};

#[derive(Debug, Parser)]
#[command(name = "donaldson-lab", version, about = "Donaldson heat flow, destabilizing subsheaves and Frobenius frames")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for the data-parallel kernels.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the heat flow of a scenario and write diagnostics and snapshots.
    Flow(RunArgs),
    /// Extract the destabilizing subsheaf from a blow-up run.
    Destab(RunArgs),
    /// Solve for a holomorphic frame of a truncated-series problem.
    Frobenius(FrobeniusArgs),
    /// Run invariant suites and print a pass/fail table.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file; for `destab` also a prior `flow` output directory.
    #[arg(long, value_name = "PATH")]
    pub scenario: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Overrides `bundle.seed`.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FrobeniusArgs {
    /// Scenario with a `frobenius` block, or a problem file.
    #[arg(long, value_name = "PATH")]
    pub scenario: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, conflicts_with = "exact")]
    pub float: bool,
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// all, ibp, uy, harnack, trace, projection or membership.
    #[arg(default_value = "all")]
    pub suite: String,
    /// Takes grid, flow controls and analysis tolerances from this file.
    #[arg(long, value_name = "PATH")]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

/// Exit status plus a human summary for stdout.
#[derive(Debug)]
pub struct Outcome {
    pub code: u8,
    pub summary: String,
}

pub const EXIT_TIMEOUT: u8 = 2;
pub const EXIT_NOT_DESTABILIZING: u8 = 3;
pub const EXIT_CHECK_FAILED: u8 = 4;

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Flow(a) => cmd_flow(a),
        Command::Destab(a) => cmd_destab(a),
        Command::Frobenius(a) => cmd_frobenius(a),
        Command::Check(a) => cmd_check(a),
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<(Scenario, String, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (mut sc, hash) = Scenario::load(path)?;
    if let (Some(s), Some(b)) = (seed, sc.bundle.as_mut()) {
        b.seed = s;
    }
    Ok((sc, hash, text))
}

fn out_dir(flag: &Option<PathBuf>, sc: Option<&Scenario>, fallback: &str) -> PathBuf {
    flag.clone()
        .or_else(|| sc.and_then(|s| s.output.clone()))
        .unwrap_or_else(|| PathBuf::from(fallback))
}

fn grid_json(sc: &Scenario) -> Result<Value> {
    let g = sc.geometry()?;
    Ok(json!({
        "n": g.n(),
        "grid": g.grid(),
        "periods": g.periods(),
        "spacing": (0..g.axes()).map(|a| g.spacing(a)).collect::<Vec<_>>(),
        "points": g.npoints(),
    }))
}

pub fn cmd_flow(a: &RunArgs) -> Result<Outcome> {
    let (sc, hash, text) = load(&a.scenario, a.seed)?;
    let out = out_dir(&a.out, Some(&sc), "out");
    let spec = sc.bundle()?;
    let flow = DonaldsonFlow::new(&spec, sc.flow.normalize_det);
    let traj = flow.run(&sc.flow)?;
    io::atomic_write(&out.join("scenario.json"), text.as_bytes())?;
    io::atomic_write(&out.join("diagnostics.csv"), io::diagnostics_csv(&traj.diagnostics).as_bytes())?;
    let mut index = String::from("index,t,file\n");
    for (i, s) in traj.snapshots.iter().enumerate() {
        let name = format!("snap_{i:05}.bin");
        io::write_field(&out.join("snapshots").join(&name), &s.h.h)?;
        index.push_str(&format!("{i},{},snapshots/{name}\n", s.t));
    }
    io::atomic_write(&out.join("snapshots.csv"), index.as_bytes())?;
    io::atomic_write(&out.join("h_final.csv"), io::field_to_csv(&traj.last().h.h).as_bytes())?;
    let regions = if spec.geometry().n() == 2 && traj.verdict == Verdict::BlowUp {
        let a = &sc.analysis;
        flow::concentration_detect(&spec, &traj, a.concentration_radius, a.concentration_eps)?
    } else {
        vec![]
    };
    let d = &traj.diagnostics;
    let report = json!({
        "scenario_hash": hash,
        "scenario_dir": std::path::absolute(a.scenario.parent().unwrap_or(Path::new(".")))
            .map_err(|e| Error::io(&a.scenario, e))?,
        "seed": sc.bundle_block()?.seed,
        "verdict": traj.verdict,
        "t_final": traj.last().t,
        "residual_final": d.residual.last(),
        "sup_h_final": d.sup_h.last(),
        "mu": traj.mu,
        "degree": spec.degree(),
        "rank": spec.rank(),
        "normalize_det": traj.normalize_det,
        "dt0": sc.flow.dt0.unwrap_or_else(|| flow::FlowControls::default_dt(&spec, traj.normalize_det)),
        "accepted_steps": traj.accepted_steps,
        "rejected_steps": traj.rejected_steps,
        "max_residual_increase": traj.max_residual_increase,
        "snapshots": traj.snapshots.len(),
        "concentration": regions,
        "grid": grid_json(&sc)?,
        "tolerances": sc.flow,
    });
    io::write_json(&out.join("verdict.json"), &report)?;
    let code = if traj.verdict == Verdict::Timeout { EXIT_TIMEOUT } else { 0 };
    Ok(Outcome {
        code,
        summary: format!(
            "{:?} at t = {:.4} after {} steps (residual {:.3e}, sup|h| {:.3e}); wrote {}",
            traj.verdict,
            traj.last().t,
            traj.accepted_steps,
            d.residual.last().copied().unwrap_or(f64::NAN),
            d.sup_h.last().copied().unwrap_or(f64::NAN),
            out.display()
        ),
    })
}

/// Rebuilds the trajectory of a `flow` output directory.
pub fn load_run(dir: &Path) -> Result<(Scenario, String, crate::bundle::BundleSpec, FlowTrajectory)> {
    let path = dir.join("verdict.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let v: Value = serde_json::from_str(&text)?;
    let path = dir.join("scenario.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let (mut sc, hash) = Scenario::from_str(&text)?;
    if let Some(base) = v["scenario_dir"].as_str() {
        sc.resolve(Path::new(base));
    }
    if let (Some(seed), Some(b)) = (v["seed"].as_u64(), sc.bundle.as_mut()) {
        b.seed = seed;
    }
    let spec = sc.bundle()?;
    let verdict: Verdict = serde_json::from_value(v["verdict"].clone())?;
    if verdict != Verdict::BlowUp {
        return Err(Error::precondition(format!(
            "{} holds a {verdict:?} run; destabilization needs a blow-up run",
            dir.display()
        )));
    }
    let path = dir.join("snapshots.csv");
    let index = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut snapshots = vec![];
    for line in index.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let (Some(t), Some(file)) = (cols.get(1), cols.get(2)) else {
            return Err(Error::Format(format!("bad snapshot index line `{line}`")));
        };
        let t: f64 = t.parse().map_err(|_| Error::Format(format!("bad time `{t}`")))?;
        let h = MetricField::new(io::read_field(&dir.join(file))?)?;
        snapshots.push(Snapshot { t, h });
    }
    let traj = FlowTrajectory {
        snapshots,
        diagnostics: Default::default(),
        verdict,
        mu: spec.slope(),
        normalize_det: v["normalize_det"].as_bool().unwrap_or(spec.rank() > 1),
        accepted_steps: v["accepted_steps"].as_u64().unwrap_or(0) as usize,
        rejected_steps: v["rejected_steps"].as_u64().unwrap_or(0) as usize,
        max_residual_increase: v["max_residual_increase"].as_f64().unwrap_or(0.0),
    };
    Ok((sc, hash, spec, traj))
}

pub fn cmd_destab(a: &RunArgs) -> Result<Outcome> {
    let (sc, hash, spec, traj) = if a.scenario.is_dir() {
        load_run(&a.scenario)?
    } else {
        let (sc, hash, _) = load(&a.scenario, a.seed)?;
        let spec = sc.bundle()?;
        let traj = DonaldsonFlow::new(&spec, sc.flow.normalize_det).run(&sc.flow)?;
        if traj.verdict != Verdict::BlowUp {
            return Err(Error::precondition(format!(
                "flow ended {:?}; destabilization needs a blow-up run",
                traj.verdict
            )));
        }
        (sc, hash, spec, traj)
    };
    let out = out_dir(&a.out, Some(&sc), "out");
    let mask = if spec.geometry().n() == 2 {
        let an = &sc.analysis;
        let regions = flow::concentration_detect(&spec, &traj, an.concentration_radius, an.concentration_eps)?;
        Some(flow::region_mask(spec.geometry().npoints(), &regions))
    } else {
        None
    };
    let (rep, proj) = destab::destabilize_verdict(&spec, &traj, mask.as_deref(), &sc.analysis.destab)?;
    let evidence = json!({
        "scenario_hash": hash,
        "k": rep.rank_f,
        "mu_F": rep.mu_f,
        "mu_E": rep.mu_e,
        "mu_F_ge_mu_E": rep.destabilizing,
        "grid": grid_json(&sc)?,
        "report": rep,
    });
    io::write_json(&out.join("destab.json"), &evidence)?;
    io::atomic_write(&out.join("eigen_histogram.csv"), io::histogram_csv(&rep.histogram).as_bytes())?;
    io::atomic_write(&out.join("spectrum.csv"), io::spectrum_csv(&rep.spectrum).as_bytes())?;
    io::write_field(&out.join("pi.bin"), &proj.pi)?;
    Ok(Outcome {
        code: if rep.destabilizing { 0 } else { EXIT_NOT_DESTABILIZING },
        summary: format!(
            "rank {} subsheaf with slope {:.6} against {:.6} ({}); wrote {}",
            rep.rank_f,
            rep.mu_f,
            rep.mu_e,
            if rep.destabilizing { "destabilizing" } else { "not destabilizing" },
            out.display()
        ),
    })
}

fn solve<T: Coeff>(problem: &Value, degree: u32) -> Result<Value> {
    let p = series::problem_from_json::<T>(problem, degree)?;
    let a = match p.a {
        Some(a) => a,
        None => series::relation_matrix(&p.f)?,
    };
    let sol = series::holomorphic_frame(&p.f, &a)?;
    let mut v = series::solution_to_json(&sol);
    v["degree"] = json!(p.f.degree());
    Ok(v)
}

pub fn cmd_frobenius(a: &FrobeniusArgs) -> Result<Outcome> {
    let text = std::fs::read_to_string(&a.scenario).map_err(|e| Error::io(&a.scenario, e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Scenario {
        key: format!("line {} column {}", e.line(), e.column()),
        msg: e.to_string(),
    })?;
    let (problem_path, degree, mode, sc) = if v.get("geometry").is_some() {
        let (sc, _) = Scenario::load(&a.scenario)?;
        let fb = sc.frobenius.clone().ok_or_else(|| Error::Scenario {
            key: "frobenius".into(),
            msg: "scenario has no frobenius block".into(),
        })?;
        (fb.problem, fb.degree, fb.mode, Some(sc))
    } else {
        let mode = match v.get("mode").and_then(Value::as_str) {
            Some("float") => SeriesMode::Float,
            Some("exact") | None => SeriesMode::Exact,
            Some(other) => {
                return Err(Error::Scenario {
                    key: "mode".into(),
                    msg: format!("mode must be exact or float, got {other}"),
                })
            }
        };
        (a.scenario.clone(), 8, mode, None)
    };
    let mode = if a.float {
        SeriesMode::Float
    } else if a.exact {
        SeriesMode::Exact
    } else {
        mode
    };
    let ptext = std::fs::read_to_string(&problem_path).map_err(|e| Error::io(&problem_path, e))?;
    let problem: Value = serde_json::from_str(&ptext)?;
    let mut sol = match mode {
        SeriesMode::Exact => solve::<Exact>(&problem, degree)?,
        SeriesMode::Float => solve::<num_complex::Complex64>(&problem, degree)?,
    };
    sol["scenario_hash"] = json!(crate::scenario::hash_text(&text));
    sol["problem_hash"] = json!(crate::scenario::hash_text(&ptext));
    sol["float_gate"] = json!(series::FLOAT_GATE);
    let out = out_dir(&a.out, sc.as_ref(), "out");
    io::write_json(&out.join("frobenius.json"), &sol)?;
    let cert = &sol["certificates"];
    Ok(Outcome {
        code: 0,
        summary: format!(
            "{} frame at degree {}: max residual {:e} (identically zero: {}); wrote {}",
            sol["mode"].as_str().unwrap_or("?"),
            sol["degree"],
            cert["max_residual"].as_f64().unwrap_or(f64::NAN),
            cert["exact"],
            out.display()
        ),
    })
}

pub fn cmd_check(a: &CheckArgs) -> Result<Outcome> {
    let (ctx, hash, sc) = match &a.scenario {
        Some(p) => {
            let (sc, hash, _) = load(p, a.seed)?;
            let seed = a.seed.or(sc.bundle.as_ref().map(|b| b.seed)).unwrap_or(0);
            let ctx = CheckContext::new(sc.geometry.grid, seed, sc.flow.clone(), &sc.analysis);
            (ctx, Some(hash), Some(sc))
        }
        None => {
            let mut ctx = CheckContext::default();
            ctx.seed = a.seed.unwrap_or(0);
            (ctx, None, None)
        }
    };
    let rows = checks::run_suite(&a.suite, &ctx)?;
    let table = checks::table(&rows);
    let failed = rows.iter().filter(|r| !r.pass).count();
    if let Some(out) = a.out.clone().or_else(|| sc.as_ref().and_then(|s| s.output.clone())) {
        io::atomic_write(&out.join("check.csv"), checks::rows_csv(&rows).as_bytes())?;
        let report = json!({
            "scenario_hash": hash,
            "suite": a.suite,
            "grid": ctx.grid,
            "seed": ctx.seed,
            "tolerances": {
                "trace": checks::TRACE_TOL,
                "det": checks::DET_TOL,
                "ibp_min_rate": checks::IBP_MIN_RATE,
                "uy": checks::UY_TOL,
                "uy_exact": checks::UY_EXACT_TOL,
                "projection": checks::PROJECTION_TOL,
                "slope_identity": checks::SLOPE_IDENTITY_TOL,
                "analysis": ctx.destab,
            },
            "rows": rows,
            "failed": failed,
        });
        io::write_json(&out.join("check.json"), &report)?;
    }
    Ok(Outcome {
        code: if failed == 0 { 0 } else { EXIT_CHECK_FAILED },
        summary: format!("{table}{} of {} rows passed", rows.len() - failed, rows.len()),
    })
}
