//! Experiment orchestration for the CLI modes.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use issc_core::array_channel::{default_angle_grid, BeamformerSet, Scenario};
use issc_core::csvio::{fmt_float, matrix_to_csv};
use issc_core::music::evaluate_sensing;
use issc_core::optimizer::{self, OptimizerOptions, RunOutput};
use issc_core::scalar::rad_to_deg;
use issc_core::secrecy::worst_case_ssr;
use issc_core::semantic::computation_power;
use issc_core::sensing::{design_reference_cov, mismatch};
use issc_core::IsscError;

use crate::config::ExperimentConfig;
use crate::CliError;

pub struct RunContext {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub emit_trace: bool,
}

impl RunContext {
    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", self.out_dir.display())))?;
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Io(format!("json: {e}")))?;
        text.push('\n');
        self.write(name, &text)
    }
}

fn solve_reference(
    scenario: &Scenario<f64>,
    config: &ExperimentConfig,
) -> Result<(issc_core::linalg::CMatrix<f64>, f64), CliError> {
    design_reference_cov(scenario, &config.sensing_config()).map_err(CliError::from)
}

/// One optimizer execution plus the derived row values.
struct PointResult {
    budget_dbm: f64,
    mode: &'static str,
    feasible: bool,
    error: Option<String>,
    output: Option<RunOutput<f64>>,
    scenario: Option<Scenario<f64>>,
}

fn execute_point(
    config: &ExperimentConfig,
    seed: u64,
    budget_dbm: f64,
    optimize_rho: bool,
) -> Result<PointResult, CliError> {
    let mode = if optimize_rho { "semantic" } else { "baseline" };
    let scenario = config.scenario(budget_dbm, seed)?;
    let (ref_cov, _) = solve_reference(&scenario, config)?;
    match optimizer::run(
        &scenario,
        &ref_cov,
        &config.optimizer_options(optimize_rho),
    ) {
        Ok(output) => Ok(PointResult {
            budget_dbm,
            mode,
            feasible: true,
            error: None,
            output: Some(output),
            scenario: Some(scenario),
        }),
        Err(IsscError::Infeasible(report)) => Ok(PointResult {
            budget_dbm,
            mode,
            feasible: false,
            error: Some(report.to_string()),
            output: None,
            scenario: Some(scenario),
        }),
        Err(e) => Err(CliError::from(e)),
    }
}

fn sweep_header(k_users: usize) -> String {
    let mut cols = vec![
        "budget_dbm".to_string(),
        "mode".to_string(),
        "feasible".to_string(),
        "sum_ssr".to_string(),
    ];
    for k in 0..k_users {
        cols.push(format!("ssr_user{k}"));
    }
    for k in 0..k_users {
        cols.push(format!("rho_user{k}"));
    }
    for k in 0..k_users {
        cols.push(format!("sinr_user{k}"));
    }
    cols.extend(
        [
            "comp_mw",
            "cands_mw",
            "outer_iters",
            "randomization_ratio",
        ]
        .map(String::from),
    );
    cols.join(",")
}

fn sweep_row(result: &PointResult, k_users: usize) -> String {
    let mut cols = vec![
        fmt_float(result.budget_dbm),
        result.mode.to_string(),
        if result.feasible { "1" } else { "0" }.to_string(),
    ];
    match &result.output {
        Some(out) => {
            cols.push(fmt_float(out.report.sum_ssr()));
            for k in 0..k_users {
                cols.push(fmt_float(out.report.ssr[k]));
            }
            for k in 0..k_users {
                cols.push(fmt_float(out.state.rhos[k]));
            }
            for k in 0..k_users {
                cols.push(fmt_float(out.report.per_user_sinr[k]));
            }
            let comp = computation_power(
                result
                    .scenario
                    .as_ref()
                    .expect("feasible rows carry the scenario")
                    .comp_coeff,
                &out.state.rhos,
            )
            .unwrap_or(f64::NAN);
            cols.push(fmt_float(comp));
            cols.push(fmt_float(out.beams.total_power()));
            cols.push(out.state.outer_iter.to_string());
            cols.push(fmt_float(out.randomization_ratio));
        }
        None => {
            for _ in 0..(1 + 3 * k_users + 2) {
                cols.push(fmt_float(0.0));
            }
            cols.push("0".to_string());
            cols.push(fmt_float(0.0));
        }
    }
    cols.join(",")
}

fn write_beams(ctx: &RunContext, prefix: &str, beams: &BeamformerSet<f64>) -> Result<(), CliError> {
    for (k, w) in beams.w_mats.iter().enumerate() {
        ctx.write(&format!("{prefix}_W{k}.csv"), &matrix_to_csv(w))?;
    }
    for (l, r) in beams.r_mats.iter().enumerate() {
        ctx.write(&format!("{prefix}_R{l}.csv"), &matrix_to_csv(r))?;
    }
    Ok(())
}

fn trace_csv(out: &RunOutput<f64>) -> String {
    let mut text = String::from("outer_iter,objective,comp_mw,cands_mw");
    let users = out.report.ssr.len();
    for k in 0..users {
        text.push_str(&format!(",ssr_user{k}"));
    }
    text.push('\n');
    for rec in &out.trace {
        let mut cols = vec![
            rec.outer_iter.to_string(),
            fmt_float(rec.objective),
            fmt_float(rec.comp_mw),
            fmt_float(rec.cands_mw),
        ];
        for k in 0..users {
            cols.push(fmt_float(rec.per_user_ssr[k]));
        }
        text.push_str(&cols.join(","));
        text.push('\n');
    }
    text
}

fn run_summary(
    result: &PointResult,
    scenario: &Scenario<f64>,
    ref_cov: &issc_core::linalg::CMatrix<f64>,
    seed: u64,
) -> serde_json::Value {
    match &result.output {
        Some(out) => json!({
            "mode": result.mode,
            "seed": seed,
            "budget_dbm": result.budget_dbm,
            "feasible": true,
            "objective": out.state.objective_history.last(),
            "objective_history": out.state.objective_history,
            "rhos": out.state.rhos,
            "lambdas": out.state.lambdas,
            "ssr": out.report.ssr,
            "sum_ssr": out.report.sum_ssr(),
            "per_user_sinr": out.report.per_user_sinr,
            "sdr_objective": out.sdr_objective,
            "randomized_objective": out.randomized_objective,
            "randomization_ratio": out.randomization_ratio,
            "outer_iterations": out.state.outer_iter,
            "comp_mw": computation_power(scenario.comp_coeff, &out.state.rhos).ok(),
            "cands_mw": out.beams.total_power(),
            "mismatch": mismatch(ref_cov, &out.beams),
            "version": env!("CARGO_PKG_VERSION"),
        }),
        None => json!({
            "mode": result.mode,
            "seed": seed,
            "budget_dbm": result.budget_dbm,
            "feasible": false,
            "error": result.error,
            "version": env!("CARGO_PKG_VERSION"),
        }),
    }
}

/// `run` and `bench` modes: one budget point, one mode.
pub fn run_single(ctx: &RunContext, optimize_rho: bool) -> Result<i32, CliError> {
    let budget = ctx.config.power_budget_dbm;
    let scenario = ctx.config.scenario(budget, ctx.seed)?;
    let (ref_cov, t_gap) = solve_reference(&scenario, &ctx.config)?;
    ctx.write("ref_cov.csv", &matrix_to_csv(&ref_cov))?;

    let result = execute_point(&ctx.config, ctx.seed, budget, optimize_rho)?;
    let summary = {
        let mut s = run_summary(&result, &scenario, &ref_cov, ctx.seed);
        s["sensing_gap_mw"] = json!(t_gap);
        s
    };
    ctx.write_json("summary.json", &summary)?;

    if let Some(out) = &result.output {
        write_beams(ctx, "beams", &out.beams)?;
        if ctx.emit_trace {
            ctx.write("trace.csv", &trace_csv(out))?;
        }
        Ok(0)
    } else {
        eprintln!(
            "infeasible: {}",
            result.error.as_deref().unwrap_or("unknown")
        );
        Ok(3)
    }
}

/// `sensing-ref` mode: reference covariance and its beampattern.
pub fn run_sensing_ref(ctx: &RunContext) -> Result<i32, CliError> {
    let scenario = ctx.config.scenario(ctx.config.power_budget_dbm, ctx.seed)?;
    let (ref_cov, t_gap) = solve_reference(&scenario, &ctx.config)?;
    ctx.write("ref_cov.csv", &matrix_to_csv(&ref_cov))?;

    let grid = default_angle_grid::<f64>();
    let pattern = scenario
        .geometry
        .beampattern(&ref_cov, &grid)
        .map_err(CliError::from)?;
    let mut text = String::from("angle_deg,power_mw\n");
    for (angle, p) in grid.iter().zip(pattern.iter()) {
        text.push_str(&format!("{},{}\n", fmt_float(rad_to_deg(*angle)), fmt_float(*p)));
    }
    ctx.write("beampattern.csv", &text)?;
    ctx.write_json(
        "summary.json",
        &json!({
            "mode": "sensing-ref",
            "seed": ctx.seed,
            "budget_dbm": ctx.config.power_budget_dbm,
            "achieved_gap_mw": t_gap,
            "version": env!("CARGO_PKG_VERSION"),
        }),
    )?;
    println!("achieved mainlobe-sidelobe gap: {t_gap:.6} mW");
    Ok(0)
}

/// `music` mode: run both designs, simulate echoes, and emit the spectra.
pub fn run_music(ctx: &RunContext) -> Result<i32, CliError> {
    let budget = ctx.config.power_budget_dbm;
    let scenario = ctx.config.scenario(budget, ctx.seed)?;
    let (ref_cov, _) = solve_reference(&scenario, &ctx.config)?;
    let (snapshots, grid_step) = ctx.config.music_settings();

    let mut peaks = serde_json::Map::new();
    for (tag, optimize_rho) in [("semantic", true), ("baseline", false)] {
        let result = execute_point(&ctx.config, ctx.seed, budget, optimize_rho)?;
        let Some(out) = &result.output else {
            eprintln!(
                "infeasible ({tag}): {}",
                result.error.as_deref().unwrap_or("unknown")
            );
            return Ok(3);
        };
        let eval = evaluate_sensing(&scenario, &out.beams, snapshots, grid_step, ctx.seed)
            .map_err(CliError::from)?;
        let mut text = String::from("angle_deg,spectrum_db\n");
        for (a, v) in eval.grid_deg.iter().zip(eval.pseudospectrum_db.iter()) {
            text.push_str(&format!("{},{}\n", fmt_float(*a), fmt_float(*v)));
        }
        ctx.write(&format!("spectrum_{tag}.csv"), &text)?;
        peaks.insert(
            tag.to_string(),
            json!({
                "peak_angles_deg": eval.peak_angles_deg,
                "peak_values_db": eval.peak_values_db,
                "errors_deg": eval.peak_errors_deg,
            }),
        );
    }
    ctx.write_json(
        "peaks.json",
        &json!({
            "seed": ctx.seed,
            "budget_dbm": budget,
            "targets_deg": ctx.config.target_angles_deg,
            "snapshots": snapshots,
            "results": peaks,
            "version": env!("CARGO_PKG_VERSION"),
        }),
    )?;
    Ok(0)
}

/// `sweep` mode: both modes on identical channel draws across the budget
/// grid; rows land in `sweep.csv`, per-point beams beside it, and a JSON
/// summary records seeds and failures.
pub fn run_sweep(ctx: &RunContext) -> Result<i32, CliError> {
    let points = ctx.config.sweep_points();
    let k_users = ctx.config.cu_angles_deg.len();

    // Points are independent; run them in parallel and write at the end in
    // deterministic order.
    let jobs: Vec<(usize, f64, bool)> = points
        .iter()
        .enumerate()
        .flat_map(|(i, &p)| [(i, p, true), (i, p, false)])
        .collect();
    let results: Vec<Result<PointResult, CliError>> = jobs
        .par_iter()
        .map(|&(_, budget, optimize_rho)| {
            execute_point(&ctx.config, ctx.seed, budget, optimize_rho)
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut csv = sweep_header(k_users);
    csv.push('\n');
    for (job, result) in jobs.iter().zip(results.into_iter()) {
        let result = result?;
        csv.push_str(&sweep_row(&result, k_users));
        csv.push('\n');
        if let Some(out) = &result.output {
            let prefix = format!("point{:02}_{}", job.0, result.mode);
            write_beams(ctx, &prefix, &out.beams)?;
        }
        if !result.feasible {
            failures.push(json!({
                "budget_dbm": result.budget_dbm,
                "mode": result.mode,
                "error": result.error,
            }));
        }
        rows.push(json!({
            "budget_dbm": result.budget_dbm,
            "mode": result.mode,
            "feasible": result.feasible,
            "sum_ssr": result.output.as_ref().map(|o| o.report.sum_ssr()),
        }));
    }
    ctx.write("sweep.csv", &csv)?;
    ctx.write_json(
        "summary.json",
        &json!({
            "mode": "sweep",
            "seed": ctx.seed,
            "points_dbm": points,
            "rows": rows,
            "failures": failures,
            "version": env!("CARGO_PKG_VERSION"),
        }),
    )?;
    Ok(0)
}

/// Recomputes the secrecy report from beams parsed back out of emitted CSV
/// files; the sweep tests use this for round-trip consistency.
pub fn recompute_ssr_from_dir(
    dir: &Path,
    prefix: &str,
    scenario: &Scenario<f64>,
    rhos: &[f64],
) -> Result<Vec<f64>, CliError> {
    let mut w_mats = Vec::new();
    for k in 0..scenario.n_users() {
        let text = std::fs::read_to_string(dir.join(format!("{prefix}_W{k}.csv")))
            .map_err(|e| CliError::Io(e.to_string()))?;
        w_mats.push(issc_core::csvio::matrix_from_csv(&text).map_err(CliError::from)?);
    }
    let mut r_mats = Vec::new();
    for l in 0..scenario.n_targets() {
        let text = std::fs::read_to_string(dir.join(format!("{prefix}_R{l}.csv")))
            .map_err(|e| CliError::Io(e.to_string()))?;
        r_mats.push(issc_core::csvio::matrix_from_csv(&text).map_err(CliError::from)?);
    }
    let beams = BeamformerSet { w_mats, r_mats };
    Ok(worst_case_ssr(scenario, &beams, rhos).ssr)
}
