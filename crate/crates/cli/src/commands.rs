//! One function per subcommand. Each returns the tables and summary it
//! produced plus any threshold breaches; writing files is left to the caller.

use std::sync::Arc;

use ruingame_core::game::SafeLevelFlag;
use ruingame_core::ode::{game_cost, integrate_state_ode};
use ruingame_core::oracle::{grid_game_value, GridSpec};
use ruingame_core::report::Table;
use ruingame_core::sde::{convergence_sweep, estimate_jn, SimEstimate};
use ruingame_core::{Error, Execution, FeedbackPolicy, GameSolution, PolicySpec, Problem};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Default)]
pub struct Output {
    pub tables: Vec<Table>,
    /// `(file name, contents)`.
    pub summary: Option<(&'static str, Value)>,
    pub breaches: Vec<String>,
    pub warnings: Vec<String>,
    /// Set by `validate` when a check fails.
    pub invalid: bool,
}

fn validated(cfg: &RunConfig) -> Result<Problem, CliError> {
    let problem = cfg.problem()?;
    let report = problem.validate();
    if !report.is_ok() {
        return Err(CliError::Validation(report));
    }
    Ok(problem)
}

fn solve(problem: &Problem, out: &mut Output) -> Arc<GameSolution> {
    let game = GameSolution::solve(problem);
    if let Some(SafeLevelFlag::QuadratureFailure(reason)) = &game.safe_level().flag {
        out.warnings
            .push(format!("safe level fell back to the barrier b: {reason}"));
    }
    Arc::new(game)
}

fn policy_for(cfg: &RunConfig, game: &Arc<GameSolution>) -> Result<FeedbackPolicy, CliError> {
    let spec = cfg.policy.clone().unwrap_or(PolicySpec::PiStar { m1: None });
    Ok(FeedbackPolicy::from_spec(&spec, game)?)
}

fn require<T: Copy>(value: Option<T>, what: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("config is missing `{what}`")))
}

pub fn validate(cfg: &RunConfig) -> Result<Output, CliError> {
    let problem = cfg.problem()?;
    let report = problem.validate();
    Ok(Output {
        invalid: !report.is_ok(),
        summary: Some(("validation.json", json!({ "ok": report.is_ok(), "checks": report.checks }))),
        ..Output::default()
    })
}

pub fn value(cfg: &RunConfig) -> Result<Output, CliError> {
    let grid = require(cfg.grid, "grid")?.points()?;
    let problem = validated(cfg)?;
    let mut out = Output::default();
    let game = solve(&problem, &mut out);
    let u = game.value_table(&grid)?;
    let mut table = Table::new("value", &["x", "U", "pi_star"]);
    for (&x, &ux) in grid.iter().zip(&u) {
        table.push(vec![x.into(), ux.into(), game.pi_star(x)?.into()]);
    }
    out.tables.push(table);
    out.summary = Some((
        "value_summary.json",
        json!({ "b": game.b(), "d": game.d(), "theta": game.theta(), "m1": game.m1() }),
    ));
    Ok(out)
}

pub fn hjb_check(cfg: &RunConfig) -> Result<Output, CliError> {
    let opts = cfg.hjb;
    if opts.points == 0 {
        return Err(CliError::Usage("hjb.points must be positive".into()));
    }
    let problem = validated(cfg)?;
    let mut out = Output::default();
    let game = solve(&problem, &mut out);
    let a = problem.market.a;
    let d = game.d().to_f64();
    let spacing = (d - a) / (opts.points + 1) as f64;
    if !(opts.h > 0.0 && opts.h < spacing) {
        return Err(CliError::Usage(format!(
            "hjb.h = {} must be positive and below the point spacing {spacing}",
            opts.h
        )));
    }
    let candidate = |x: f64| game.value(x).unwrap_or(f64::NAN) + opts.perturbation * (x - a);

    let mut table = Table::new("hjb", &["x", "residual"]);
    let mut worst = 0.0f64;
    for i in 1..=opts.points {
        let x = a + spacing * i as f64;
        let residual = match game.hjb_residual(candidate, x, opts.h) {
            Ok(r) => r,
            Err(Error::NonDecreasingValue { .. }) => f64::INFINITY,
            Err(e) => return Err(e.into()),
        };
        worst = worst.max(if residual.is_nan() { f64::INFINITY } else { residual.abs() });
        table.push(vec![x.into(), residual.into()]);
    }
    let passed = worst <= opts.threshold;
    if !passed {
        out.breaches.push(format!(
            "max |residual| = {worst:e} exceeds threshold {:e}",
            opts.threshold
        ));
    }
    out.tables.push(table);
    out.summary = Some((
        "hjb_summary.json",
        json!({ "max_abs_residual": worst, "threshold": opts.threshold, "passed": passed }),
    ));
    Ok(out)
}

pub fn game_cost_cmd(cfg: &RunConfig) -> Result<Output, CliError> {
    let opts = &cfg.game_cost;
    if opts.x.is_empty() || opts.policies.is_empty() {
        return Err(CliError::Usage("game_cost needs at least one x and one policy".into()));
    }
    let problem = validated(cfg)?;
    let mut out = Output::default();
    let game = solve(&problem, &mut out);
    let psi_dot = -game.theta();

    let mut table = Table::new("saddle", &["policy", "x", "cost", "U_ref", "abs_gap"]);
    for &x in &opts.x {
        let saddle = game.saddle_controls(x)?;
        let u_ref = game.value(x)?;
        for spec in &opts.policies {
            let policy = FeedbackPolicy::from_spec(spec, &game)?;
            // Under psi* the path does not depend on the policy; T* is its
            // hitting time of a, or zero at and above the safe level.
            let t_max = if saddle.t_star > 0.0 { 2.0 * saddle.t_star } else { 0.0 };
            let path = integrate_state_ode(&problem, &policy, |_| psi_dot, x, t_max, opts.dt)?;
            let horizon = if saddle.t_star > 0.0 {
                path.tau.unwrap_or(saddle.t_star)
            } else {
                0.0
            };
            let cost = game_cost(&problem, &policy, |_| psi_dot, horizon, &path)?;
            let gap = (cost.total - u_ref).abs();
            if !(gap <= opts.tolerance) {
                out.breaches.push(format!(
                    "policy {} at x = {x}: cost {} differs from U = {u_ref} by {gap:e}",
                    spec.label(),
                    cost.total
                ));
            }
            table.push(vec![
                spec.label().into(),
                x.into(),
                cost.total.into(),
                u_ref.into(),
                gap.into(),
            ]);
        }
    }
    out.tables.push(table);
    Ok(out)
}

const SIM_HEADER: [&str; 15] = [
    "n",
    "estimator",
    "x",
    "dt",
    "paths",
    "j_hat",
    "std_err",
    "hit_fraction",
    "ess",
    "faulted_paths",
    "U_ref",
    "gap",
    "tail_warning",
    "fault_warning",
    "ess_warning",
];

/// Effective sample sizes below this fraction of the path count are
/// flagged.
const LOW_ESS_FRACTION: f64 = 0.01;

fn sim_row(table: &mut Table, est: &SimEstimate, x: f64, dt: f64, u_ref: f64, out: &mut Output) {
    let low_ess = est.ess < LOW_ESS_FRACTION * est.paths as f64;
    let faults = est.faulted_paths > 0;
    if est.tail_warning {
        out.warnings.push(format!("n = {}: truncation tail is not negligible", est.n));
    }
    if faults {
        out.warnings.push(format!("n = {}: {} paths faulted", est.n, est.faulted_paths));
    }
    if low_ess {
        out.warnings.push(format!("n = {}: effective sample size {:.1}", est.n, est.ess));
    }
    table.push(vec![
        est.n.into(),
        est.estimator.label().into(),
        x.into(),
        dt.into(),
        est.paths.into(),
        est.j_hat.into(),
        est.std_err.into(),
        est.hit_fraction.into(),
        est.ess.into(),
        est.faulted_paths.into(),
        u_ref.into(),
        (est.j_hat - u_ref).abs().into(),
        est.tail_warning.into(),
        faults.into(),
        low_ess.into(),
    ]);
}

pub fn simulate(cfg: &RunConfig, exec: Execution) -> Result<Output, CliError> {
    let sim = require(cfg.sim, "sim")?;
    let x = require(cfg.x, "x")?;
    let problem = validated(cfg)?;
    let mut out = Output::default();
    let game = solve(&problem, &mut out);
    let policy = policy_for(cfg, &game)?;
    let est = estimate_jn(&problem, &policy, &sim, x, exec)?;
    let mut table = Table::new("sim", &SIM_HEADER);
    sim_row(&mut table, &est, x, sim.dt, game.value(x)?, &mut out);
    out.tables.push(table);
    Ok(out)
}

pub fn convergence(cfg: &RunConfig, exec: Execution) -> Result<Output, CliError> {
    let sim = require(cfg.sim, "sim")?;
    let x = require(cfg.x, "x")?;
    let opts = &cfg.convergence;
    let problem = validated(cfg)?;
    let mut out = Output::default();
    let game = solve(&problem, &mut out);
    let policy = policy_for(cfg, &game)?;
    let rows = convergence_sweep(&game, &policy, &sim, x, &opts.n_list, exec)?;

    let mut table = Table::new("sim", &SIM_HEADER);
    for row in &rows {
        sim_row(&mut table, &row.estimate, x, row.dt, row.u_ref, &mut out);
    }
    if opts.monotone {
        for pair in rows.windows(2) {
            let (prev, next) = (&pair[0], &pair[1]);
            let se = prev.estimate.std_err.hypot(next.estimate.std_err);
            if next.gap > prev.gap + 3.0 * se {
                out.breaches.push(format!(
                    "gap grows from {:e} (n = {}) to {:e} (n = {}) beyond 3 standard errors ({:e})",
                    prev.gap, prev.estimate.n, next.gap, next.estimate.n, 3.0 * se
                ));
            }
        }
    }
    if let (Some(limit), Some(last)) = (opts.max_gap, rows.last()) {
        if !(last.gap <= limit) {
            out.breaches.push(format!(
                "gap {:e} at n = {} exceeds {limit}",
                last.gap, last.estimate.n
            ));
        }
    }
    out.tables.push(table);
    Ok(out)
}

pub fn oracle(cfg: &RunConfig) -> Result<Output, CliError> {
    let opts = cfg.oracle;
    let problem = validated(cfg)?;
    let mut out = Output::default();
    let game = solve(&problem, &mut out);
    let spec = GridSpec::bracketing(&problem, game.pi_star_sup(), opts.x_max, opts.h_x, opts.h_t);
    let grid = grid_game_value(&problem, game.d(), &spec)?;
    let closed = game.value_table(&grid.x)?;

    let mut table = Table::new("oracle", &["x", "U_closed_form", "U_grid", "abs_err"]);
    let mut worst = 0.0f64;
    for ((&x, &ug), &uc) in grid.x.iter().zip(&grid.v).zip(&closed) {
        let err = (ug - uc).abs();
        worst = worst.max(err);
        table.push(vec![x.into(), uc.into(), ug.into(), err.into()]);
    }
    if let Some(limit) = opts.threshold {
        if !(worst <= limit) {
            out.breaches
                .push(format!("oracle max error {worst:e} exceeds {limit:e}"));
        }
    }
    out.tables.push(table);
    out.summary = Some((
        "oracle_summary.json",
        json!({ "max_abs_err": worst, "sweeps": grid.sweeps, "residual": grid.residual }),
    ));
    Ok(out)
}
