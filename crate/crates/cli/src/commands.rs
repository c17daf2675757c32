use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hyseek_core::closeness::{log_grid, min_epsilon_masked, ClosenessReport};
use hyseek_core::scenarios::{build_scenario_seeded, list_scenarios, reference_arc, ParamValue, Scenario, ScenarioMeta};
use hyseek_core::{simulate, HybridArc, Solution, SolverConfig, Termination};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::arc_csv::write_arc;
use crate::config::RunConfig;

pub const OUT_DIR_ENV: &str = "HYSEEK_OUT_DIR";

/// Process exit status for a finished simulation.
pub fn exit_code(t: Termination) -> u8 {
    match t {
        Termination::HorizonTime | Termination::HorizonJumps => 0,
        Termination::FlowSetExit => 2,
        Termination::NoDynamicsFromPoint => 3,
    }
}

/// `--out`, then `output.dir`, then the environment, then `./out`.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub params: BTreeMap<String, ParamValue>,
    pub solver: SolverConfig,
    pub termination: Termination,
    pub steps: usize,
    pub jumps: usize,
    pub zeno_warnings: usize,
    pub terminal_time: f64,
    pub labels: Vec<String>,
    pub terminal_state: Vec<f64>,
    pub decision: Vec<usize>,
    pub target: Option<Vec<f64>>,
    /// Distance from the final `û` to `target`.
    pub terminal_error: Option<f64>,
    /// Largest `|û|` along the arc; absent when the scenario has no `û`.
    pub max_decision_norm: Option<f64>,
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

fn decision_norm(meta: &ScenarioMeta, x: &[f64]) -> f64 {
    norm(meta.decision.iter().map(|&i| x[i]))
}

impl RunReport {
    fn new(sc: &Scenario, sol: &Solution) -> Self {
        let arc = &sol.arc;
        let m = &sc.meta;
        let fin = arc.terminal();
        let terminal_error = m
            .target
            .as_ref()
            .map(|u| norm(m.decision.iter().zip(u).map(|(&i, v)| fin[i] - v)));
        let max_decision_norm = (!m.decision.is_empty()).then(|| {
            arc.samples()
                .map(|(_, _, x)| decision_norm(m, x))
                .fold(0.0, f64::max)
        });
        Self {
            scenario: m.name.clone(),
            seed: sc.config.rng_seed,
            params: m.params.clone(),
            solver: sc.config.clone(),
            termination: sol.termination,
            steps: sol.steps,
            jumps: arc.jump_count(),
            zeno_warnings: sol.zeno_warnings,
            terminal_time: arc.terminal_time(),
            labels: m.labels.clone(),
            terminal_state: fin.to_vec(),
            decision: m.decision.clone(),
            target: m.target.clone(),
            terminal_error,
            max_decision_norm,
        }
    }

    /// Largest `|û|` above ten times its starting value (or above 10 when
    /// `û` starts at the origin).
    pub fn diverged(&self, initial_norm: f64) -> bool {
        let base = if initial_norm > 0.0 { initial_norm } else { 1.0 };
        self.max_decision_norm.is_some_and(|m| m > 10.0 * base)
    }
}

fn build(cfg: &RunConfig, params: &BTreeMap<String, ParamValue>) -> Result<Scenario> {
    let mut sc = build_scenario_seeded(&cfg.scenario, params, cfg.seed)?;
    cfg.solver.apply(&mut sc.config);
    sc.config.validate()?;
    Ok(sc)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    info!("wrote {}", path.display());
    Ok(())
}

fn write_csv(path: &Path, labels: &[String], arc: &HybridArc) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_arc(BufWriter::new(f), labels, arc)?;
    info!("wrote {}", path.display());
    Ok(())
}

/// Simulates one configuration and writes `<stem>.csv` / `<stem>.json`.
fn run_one(cfg: &RunConfig, sc: &Scenario, out: &Path, stem: &str) -> Result<(Solution, RunReport)> {
    let sol = simulate(&sc.system, &sc.x0, &sc.config)?;
    let report = RunReport::new(sc, &sol);
    if cfg.write_csv {
        write_csv(&out.join(format!("{stem}.csv")), &sc.meta.labels, &sol.arc)?;
    }
    if cfg.write_report {
        write_json(&out.join(format!("{stem}.json")), &report)?;
    }
    Ok((sol, report))
}

pub fn list(json: bool) -> Result<u8> {
    let infos = list_scenarios();
    if json {
        println!("{}", serde_json::to_string_pretty(&infos)?);
        return Ok(0);
    }
    for i in &infos {
        let mark = if i.has_counterpart { "  [compare]" } else { "" };
        println!("{:<22} {}{mark}", i.name, i.description);
        for p in &i.params {
            println!("    {:<14} = {:<24} {}", p.name, p.default.to_string(), p.description);
        }
    }
    Ok(0)
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<u8> {
    let sc = build(cfg, &cfg.params)?;
    fs::create_dir_all(out)?;
    let (sol, report) = run_one(cfg, &sc, out, &cfg.scenario)?;
    println!(
        "{}: {:?} at t = {} after {} jumps",
        cfg.scenario, sol.termination, report.terminal_time, report.jumps
    );
    Ok(exit_code(sol.termination))
}

/// Closeness settings shared by `sweep` and `compare`.
struct CompareSpec {
    tau: f64,
    grid: Vec<f64>,
}

fn compare_spec(cfg: &RunConfig, sc: &Scenario) -> Result<CompareSpec> {
    let tau = cfg.compare.tau.unwrap_or(sc.config.t_max);
    let grid = cfg.compare.eps_grid.clone().unwrap_or_else(|| log_grid(1e-3, 100.0, 51));
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid[0] <= 0.0 {
        bail!("compare.eps_grid must be positive and ascending");
    }
    Ok(CompareSpec { tau, grid })
}

fn closeness(
    cfg: &RunConfig,
    sc: &Scenario,
    arc: &HybridArc,
    params: &BTreeMap<String, ParamValue>,
    spec: &CompareSpec,
) -> Result<ClosenessReport> {
    let reference = reference_arc(&cfg.scenario, params)?;
    let keep = sc
        .meta
        .counterpart
        .as_ref()
        .context("scenario names no counterpart coordinates")?;
    let projected = arc.project(keep);
    Ok(min_epsilon_masked(
        &projected,
        &reference,
        spec.tau,
        &spec.grid,
        cfg.compare.mask.as_deref(),
    )?)
}

#[derive(Debug)]
struct SweepRow {
    value: f64,
    termination: Termination,
    jumps: usize,
    terminal_error: Option<f64>,
    max_decision_norm: Option<f64>,
    diverged: bool,
    min_eps: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

pub fn sweep(cfg: &RunConfig, out: &Path) -> Result<u8> {
    let Some(sw) = &cfg.sweep else {
        bail!("sweep needs sweep.param and sweep.values");
    };
    if sw.values.is_empty() {
        bail!("sweep.values is empty");
    }
    let has_counterpart = list_scenarios()
        .into_iter()
        .find(|i| i.name == cfg.scenario)
        .map(|i| i.has_counterpart);
    // Build every point up front so that bad values fail before any run.
    let points = sw
        .values
        .iter()
        .map(|&v| {
            let mut params = cfg.params.clone();
            params.insert(sw.param.clone(), ParamValue::Scalar(v));
            let sc = build(cfg, &params)?;
            Ok((v, params, sc))
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = match has_counterpart {
        Some(true) => Some(compare_spec(cfg, &points[0].2)?),
        _ => None,
    };
    fs::create_dir_all(out)?;
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(index, (value, params, sc))| {
            let stem = format!("{}_{}_{index}", cfg.scenario, sw.param);
            let (sol, report) = run_one(cfg, sc, out, &stem)?;
            let min_eps = match &spec {
                Some(s) => closeness(cfg, sc, &sol.arc, params, s)?.min_eps.value(),
                None => None,
            };
            Ok(SweepRow {
                value: *value,
                termination: sol.termination,
                jumps: report.jumps,
                terminal_error: report.terminal_error,
                max_decision_norm: report.max_decision_norm,
                diverged: report.diverged(decision_norm(&sc.meta, &sc.x0)),
                min_eps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let path = out.join(format!("{}_sweep.csv", cfg.scenario));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        &sw.param as &str,
        "termination",
        "jumps",
        "terminal_error",
        "max_decision_norm",
        "diverged",
        "min_eps",
    ])?;
    for r in &rows {
        w.write_record([
            format!("{:.16e}", r.value),
            format!("{:?}", r.termination),
            r.jumps.to_string(),
            opt(r.terminal_error),
            opt(r.max_decision_norm),
            r.diverged.to_string(),
            opt(r.min_eps),
        ])?;
        println!(
            "{} = {}: {:?}, error {}, min_eps {}{}",
            sw.param,
            r.value,
            r.termination,
            r.terminal_error.map_or("-".into(), |e| format!("{e:.3e}")),
            r.min_eps.map_or("-".into(), |e| format!("{e:.3e}")),
            if r.diverged { ", diverged" } else { "" }
        );
    }
    w.flush()?;
    info!("wrote {}", path.display());
    // Per-run statuses live in the summary; the worst one sets the exit code.
    Ok(rows.iter().map(|r| exit_code(r.termination)).max().unwrap_or(0))
}

#[derive(Debug, Serialize)]
struct CompareDoc<'a> {
    scenario: &'a str,
    seed: u64,
    params: &'a BTreeMap<String, ParamValue>,
    termination: Termination,
    counterpart: &'a [usize],
    mask: Option<&'a [usize]>,
    #[serde(flatten)]
    report: ClosenessReport,
}

pub fn compare(cfg: &RunConfig, out: &Path) -> Result<u8> {
    let sc = build(cfg, &cfg.params)?;
    // Fail on a missing counterpart before paying for the simulation.
    reference_arc(&cfg.scenario, &cfg.params)?;
    let spec = compare_spec(cfg, &sc)?;
    let sol = simulate(&sc.system, &sc.x0, &sc.config)?;
    let report = closeness(cfg, &sc, &sol.arc, &cfg.params, &spec)?;
    fs::create_dir_all(out)?;
    let doc = CompareDoc {
        scenario: &cfg.scenario,
        seed: sc.config.rng_seed,
        params: &sc.meta.params,
        termination: sol.termination,
        counterpart: sc.meta.counterpart.as_deref().unwrap_or(&[]),
        mask: cfg.compare.mask.as_deref(),
        report,
    };
    write_json(&out.join(format!("{}_compare.json", cfg.scenario)), &doc)?;
    match doc.report.min_eps.value() {
        Some(e) => println!("{}: ({}, {e})-close", cfg.scenario, spec.tau),
        None => println!("{}: not close for any eps in the grid", cfg.scenario),
    }
    Ok(exit_code(sol.termination))
}
