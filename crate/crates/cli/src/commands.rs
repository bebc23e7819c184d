//! One function per subcommand. Each writes its artifacts and returns the
//! summary line.

use std::path::Path;

use bpri_core::ba::{trace_frontier_with, FrontierOptions};
use bpri_core::choice::{mnl_fisher_info, tri_choice_curvature, write_curvature_csv};
use bpri_core::dynamic::{classical_dp_finite, SoftPlan, StationaryPlan};
use bpri_core::gaussian::{
    default_lambda_grid, lqg_arbitrate_scalar, lqg_expected_loss, lqg_gain, lqg_gain_identity_residual,
    lqg_mutual_info, lqg_posterior_gap, lqg_scalar_discretized_ba, lqg_scalar_posterior_var,
    lqg_symmetry_residual, shrinkage_risk_mc, stein_highdim, stein_lambda_star, stein_risk_terms,
    stein_shrinkage_factor, write_highdim_csv, write_risk_curves_csv, LqgProblem, SteinProblem,
};
use bpri_core::sba::{reference_marginal, sba_run_with, SbaConfig};
use bpri_core::selftest;
use bpri_core::{
    ba_solve, kl, mc_curvature, soft_bellman_finite, soft_value_iteration, softmax_channel, solve_capacity,
    BpriError, FiniteMdp, NoiseModel, PriceParam, StepSchedule,
};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;

use crate::args::*;
use crate::config::{
    grid_values, load_problem, read_json, require_seed, resolve_price, CliError, CliResult, Context,
};
use crate::output::{info, target, to_json_bytes, to_json_lines, write_atomic, write_csv_with};

pub struct Env {
    pub out_dir: std::path::PathBuf,
    pub bits: bool,
}

impl Env {
    fn path(&self, name: &Path) -> std::path::PathBuf {
        target(&self.out_dir, name)
    }
}

fn config_err(e: BpriError) -> CliError {
    CliError::Config(e.to_string())
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn solve(a: &SolveArgs, env: &Env) -> CliResult<String> {
    let (prior, loss) = load_problem(a.problem.as_ref())?;
    let lambda = resolve_price(a.lambda, a.price)?;
    let path = env.path(&a.out);
    match ba_solve(&prior, &loss, lambda, a.tol, a.max_iter) {
        Ok(sol) => {
            write_atomic(&path, &to_json_bytes(&sol))?;
            Ok(format!(
                "solve: objective={:.10} I={} E[loss]={:.10} iterations={} -> {}",
                sol.objective_value,
                info(sol.mutual_info, env.bits),
                sol.expected_loss,
                sol.iterations,
                path.display()
            ))
        }
        Err(BpriError::MaxIterExceeded { iterations, residual, best }) => {
            write_atomic(&path, &to_json_bytes(&best))?;
            Err(CliError::Failed(format!(
                "solve: no convergence after {iterations} iterations (residual {residual:e}); last iterate -> {}",
                path.display()
            )))
        }
        Err(e) => Err(e).context("solve"),
    }
}

pub fn capacity(a: &CapacityArgs, env: &Env) -> CliResult<String> {
    let (prior, loss) = load_problem(a.problem.as_ref())?;
    let kappa = a.kappa.ok_or_else(|| CliError::Config("missing `kappa`".into()))?;
    let sol = match solve_capacity(&prior, &loss, kappa, a.tol_kappa, a.tol) {
        Err(e @ BpriError::CapacityOutOfRange { .. }) => return Err(config_err(e)),
        r => r.context("capacity")?,
    };
    let path = env.path(&a.out);
    write_atomic(&path, &to_json_bytes(&sol))?;
    let (i, e) = sol.info_and_loss();
    Ok(format!(
        "capacity: lambda={:.10} I={} E[loss]={:.10} mixture={} bisections={} -> {}",
        sol.lambda,
        info(i, env.bits),
        e,
        sol.is_mixture(),
        sol.bisections,
        path.display()
    ))
}

pub fn frontier(a: &FrontierArgs, env: &Env) -> CliResult<String> {
    let (prior, loss) = load_problem(a.problem.as_ref())?;
    let grid = grid_values(&a.grid, "grid")?;
    let opts = FrontierOptions { tol: a.tol, ..Default::default() };
    let points = trace_frontier_with(&prior, &loss, &grid, &opts).context("frontier")?;
    let path = env.path(&a.out);
    match a.format {
        Format::Json => write_atomic(&path, &to_json_lines(&points))?,
        Format::Csv => write_csv_with(&path, |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["lambda", "kappa_nats", "expected_loss"])?;
            for p in &points {
                w.write_record([fmt17(p.lambda), fmt17(p.kappa), fmt17(p.expected_loss)])?;
            }
            w.flush()?;
            Ok(())
        })?,
    }
    let last = points.last().expect("nonempty grid");
    Ok(format!(
        "frontier: {} points, max I={} min E[loss]={:.10} -> {}",
        points.len(),
        info(last.kappa, env.bits),
        last.expected_loss,
        path.display()
    ))
}

pub fn sba(a: &SbaArgs, env: &Env) -> CliResult<String> {
    let (prior, loss) = load_problem(a.problem.as_ref())?;
    let lambda = resolve_price(a.lambda, a.price)?;
    let seed = require_seed(a.seed)?;
    if !(a.sigma >= 0.0) {
        return Err(CliError::Config("`sigma` must be nonnegative".into()));
    }
    if a.steps == 0 || a.log_stride == 0 || a.batch == 0 {
        return Err(CliError::Config("`steps`, `log_stride` and `batch` must be positive".into()));
    }
    let reference = reference_marginal(&prior, &loss, lambda).context("reference fixed point")?;
    let cfg = SbaConfig {
        schedule: StepSchedule::new(a.a, a.b).map_err(config_err)?,
        noise: if a.sigma > 0.0 { NoiseModel::Gaussian { sigma: a.sigma } } else { NoiseModel::None },
        seed,
        steps: a.steps,
        log_stride: a.log_stride,
        batch: a.batch,
        reference: Some(reference.clone()),
    };
    let traj = sba_run_with(&prior, &loss, lambda, &cfg).context("sba")?;
    let path = env.path(&a.out);
    match a.format {
        Format::Json => write_atomic(&path, &to_json_bytes(&traj))?,
        Format::Csv => write_csv_with(&path, |buf| traj.write_csv(buf))?,
    }
    let final_kl = kl(reference.as_slice(), traj.final_marginal.as_slice()).context("final KL")?;
    Ok(format!(
        "sba: steps={} KL(q*||q_T)={} clamps={} -> {}",
        a.steps,
        info(final_kl, env.bits),
        traj.clamp_events,
        path.display()
    ))
}

pub fn mnl_mc(a: &MnlMcArgs, env: &Env) -> CliResult<String> {
    let seed = require_seed(a.seed)?;
    let grid = grid_values(&a.grid, "grid")?;
    let rows = match mc_curvature(a.k, &grid, a.b, seed) {
        Err(e @ BpriError::InvalidParameter(_)) => return Err(config_err(e)),
        r => r.context("mnl-mc")?,
    };
    let path = env.path(&a.out);
    match a.format {
        Format::Json => write_atomic(&path, &to_json_lines(&rows))?,
        Format::Csv => write_csv_with(&path, |buf| write_curvature_csv(&rows, buf))?,
    }
    let peak = rows.iter().max_by(|x, y| x.mean.total_cmp(&y.mean)).expect("nonempty grid");
    Ok(format!(
        "mnl-mc: {} rows, peak mean curvature {:.4} at lambda={} -> {}",
        rows.len(),
        peak.mean,
        peak.lambda,
        path.display()
    ))
}

#[derive(Serialize)]
struct TriRow {
    theta: f64,
    lambda: f64,
    p1: f64,
    p2: f64,
    p3: f64,
    curvature: f64,
    fisher: f64,
}

pub fn tri_choice(a: &TriChoiceArgs, env: &Env) -> CliResult<String> {
    let thetas = grid_values(&a.theta, "theta")?;
    let lambdas = grid_values(&a.grid, "grid")?;
    let mut rows = Vec::with_capacity(thetas.len() * lambdas.len());
    for &theta in &thetas {
        for &l in &lambdas {
            let lambda = PriceParam::new(l).map_err(config_err)?;
            let p = softmax_channel(&[theta, 0.0, -theta], lambda);
            rows.push(TriRow {
                theta,
                lambda: l,
                p1: p[0],
                p2: p[1],
                p3: p[2],
                curvature: tri_choice_curvature(theta, lambda),
                fisher: mnl_fisher_info(theta, lambda),
            });
        }
    }
    let path = env.path(&a.out);
    match a.format {
        Format::Json => write_atomic(&path, &to_json_lines(&rows))?,
        Format::Csv => write_csv_with(&path, |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["theta", "lambda", "p1", "p2", "p3", "curvature", "fisher"])?;
            for r in &rows {
                w.write_record([r.theta, r.lambda, r.p1, r.p2, r.p3, r.curvature, r.fisher].map(fmt17))?;
            }
            w.flush()?;
            Ok(())
        })?,
    }
    Ok(format!("tri-choice: {} rows -> {}", rows.len(), path.display()))
}

pub fn stein(a: &SteinArgs, env: &Env) -> CliResult<String> {
    let prob = match &a.theta {
        Some(t) => SteinProblem::new(t.clone(), a.tau2),
        None => SteinProblem::sparse(a.p, a.tau2),
    }
    .map_err(config_err)?;
    let (lambda_star, risk_star) = stein_lambda_star(&prob.theta, a.tau2, &default_lambda_grid()).context("lambda*")?;
    let mut report = json!({
        "p": prob.dim(),
        "tau2": a.tau2,
        "theta": prob.theta,
        "lambda_star": lambda_star,
        "risk_at_lambda_star": risk_star,
        "risk_mle": prob.dim() as f64,
    });
    let mut line = format!("stein: p={} lambda*={:.6} R(lambda*)={:.6}", prob.dim(), lambda_star, risk_star);
    if a.lambda.is_some() || a.price.is_some() {
        let lambda = resolve_price(a.lambda, a.price)?;
        let s = stein_shrinkage_factor(lambda, a.tau2).map_err(config_err)?;
        let (bias2, var) = stein_risk_terms(lambda, &prob.theta, a.tau2).map_err(config_err)?;
        let mut at = json!({
            "lambda": lambda.lambda(),
            "shrinkage": s,
            "bias2": bias2,
            "variance": var,
            "risk": bias2 + var,
        });
        line.push_str(&format!(" R({})={:.6}", lambda.lambda(), bias2 + var));
        if let Some(seed) = a.seed {
            let (mc, se) = shrinkage_risk_mc(s, &prob.theta, a.reps, seed).context("Monte Carlo risk")?;
            at["mc_risk"] = json!(mc);
            at["mc_se"] = json!(se);
            at["mc_within_3se"] = json!((mc - bias2 - var).abs() <= 3.0 * se);
            line.push_str(&format!(" MC={mc:.6}(se {se:.6})"));
        }
        report["at_lambda"] = at;
    }
    let path = env.path(&a.out);
    write_atomic(&path, &to_json_bytes(&report))?;
    Ok(format!("{line} -> {}", path.display()))
}

pub fn stein_highdim_cmd(a: &SteinHighdimArgs, env: &Env) -> CliResult<String> {
    let seed = require_seed(a.seed)?;
    if a.dims.iter().any(|&p| p < 3) {
        return Err(CliError::Config("`dims` entries must be at least 3".into()));
    }
    let rows = stein_highdim(&a.dims, a.tau2, a.reps, seed).map_err(config_err)?;
    let path = env.path(&a.out);
    write_csv_with(&path, |buf| write_highdim_csv(&rows, buf))?;
    let curves = env.path(&a.curves_out);
    write_csv_with(&curves, |buf| write_risk_curves_csv(&a.dims, a.tau2, &default_lambda_grid(), buf))?;
    let lam: Vec<String> = rows.iter().map(|r| format!("{:.4}", r.lambda_star)).collect();
    Ok(format!(
        "stein-highdim: lambda*(p)=[{}] -> {}, {}",
        lam.join(", "),
        path.display(),
        curves.display()
    ))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn lqg(a: &LqgArgs, env: &Env) -> CliResult<String> {
    let lambda = resolve_price(a.lambda, a.price)?;
    let mut notes: Vec<String> = Vec::new();
    let (report, line) = match &a.problem {
        None => {
            let scalar = lqg_scalar_posterior_var(a.sigma_x2, a.gamma, a.a, lambda).map_err(config_err)?;
            let oracle = lqg_scalar_discretized_ba(a.sigma_x2, a.gamma, a.a, lambda, a.n_grid, 4.0)
                .context("discretized reference")?;
            let arb = lqg_arbitrate_scalar(a.sigma_x2, a.gamma * a.a * a.a, lambda, a.n_grid)
                .context("closed-form arbitration")?;
            if !scalar.formulas_agree {
                notes.push(format!(
                    "displayed posterior-variance rule gives {:.10}, first-order condition gives {:.10}; objective {:.10} vs {:.10}",
                    scalar.displayed_var, scalar.numeric_var, scalar.displayed_objective, scalar.numeric_objective
                ));
            }
            notes.push(format!(
                "MI closed forms: det form {:.10}, ratio form {:.10}, discretized oracle {:.10}; closer: {:?}",
                arb.mi_detform, arb.mi_ratio, arb.oracle_mi, arb.closer_form
            ));
            notes.push(format!(
                "gain formula at lambda -> 0 gives K = {:.6}, not 0",
                arb.gain_near_zero_price
            ));
            let line = format!(
                "lqg: sigma2*={:.10} I={} E[loss]={:.10} formulas_agree={}",
                scalar.numeric_var,
                info(scalar.mutual_info, env.bits),
                scalar.expected_loss,
                scalar.formulas_agree
            );
            let report = json!({
                "mode": "scalar",
                "lambda": lambda.lambda(),
                "scalar": scalar,
                "oracle": {
                    "mutual_info": oracle.mutual_info,
                    "expected_loss": oracle.expected_loss,
                    "iterations": oracle.iterations,
                    "n_grid": a.n_grid,
                },
                "arbitration": arb,
                "notes": notes,
            });
            (report, line)
        }
        Some(path) => {
            let prob: LqgProblem = read_json(path)?;
            let (sx, q) = prob.matrices().map_err(config_err)?;
            let gain = lqg_gain(&sx, &q, lambda).map_err(config_err)?;
            let mi = lqg_mutual_info(&sx, &q, lambda).map_err(config_err)?;
            let loss = lqg_expected_loss(&sx, &q, lambda).map_err(config_err)?;
            if !mi.consistent {
                notes.push(format!(
                    "MI closed forms disagree: det form {:.10}, ratio form {:.10} (difference {:.3e})",
                    mi.mi_detform, mi.mi_ratio, mi.discrepancy
                ));
            }
            let mut report = json!({
                "mode": "matrix",
                "lambda": lambda.lambda(),
                "k": rows_of(&gain.k),
                "sigma_eps": rows_of(&gain.sigma_eps),
                "mutual_info": mi,
                "expected_loss": loss,
                "gain_identity_residual": lqg_gain_identity_residual(&gain, &q, lambda),
                "symmetry_residual": lqg_symmetry_residual(&gain, &sx),
                "posterior_gap_min_eig": lqg_posterior_gap(&gain, &sx),
            });
            if sx.nrows() == 1 {
                let arb = lqg_arbitrate_scalar(sx[(0, 0)], q[(0, 0)], lambda, a.n_grid)
                    .context("closed-form arbitration")?;
                notes.push(format!(
                    "discretized oracle MI {:.10}; closer closed form: {:?}",
                    arb.oracle_mi, arb.closer_form
                ));
                report["arbitration"] = json!(arb);
            }
            report["notes"] = json!(notes);
            let line = format!(
                "lqg: n={} I(det)={} I(ratio)={} E[loss]={:.10} consistent={}",
                sx.nrows(),
                info(mi.mi_detform, env.bits),
                info(mi.mi_ratio, env.bits),
                loss,
                mi.consistent
            );
            (report, line)
        }
    };
    let path = env.path(&a.out);
    write_atomic(&path, &to_json_bytes(&report))?;
    Ok(format!("{line} -> {}", path.display()))
}

fn write_stationary_csv(plan: &StationaryPlan, buf: &mut Vec<u8>) -> bpri_core::Result<()> {
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(["t", "state", "action", "prob", "Q", "V"])?;
    let na = plan.policy.n_y();
    for s in 0..plan.policy.n_x() {
        for act in 0..na {
            w.write_record([
                "0".to_string(),
                s.to_string(),
                act.to_string(),
                fmt17(plan.policy.get(s, act)),
                fmt17(plan.q_values[s * na + act]),
                fmt17(plan.value[s]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_plan(plan: &SoftPlan, format: Format, path: &Path) -> CliResult<()> {
    match format {
        Format::Json => write_atomic(path, &to_json_bytes(plan)),
        Format::Csv => write_csv_with(path, |buf| plan.write_csv(buf)),
    }
}

pub fn bellman(a: &BellmanArgs, env: &Env) -> CliResult<String> {
    let mdp_path = a.mdp.as_ref().ok_or_else(|| CliError::Config("missing `mdp`".into()))?;
    let mdp: FiniteMdp = read_json(mdp_path)?;
    mdp.validate().map_err(|e| CliError::Config(format!("{}: {e}", mdp_path.display())))?;
    let lambda = resolve_price(a.lambda, a.price)?;
    let path = env.path(&a.out);
    if a.stationary {
        let plan = soft_value_iteration(&mdp, lambda, a.tol, a.max_iter).context("soft value iteration")?;
        match a.format {
            Format::Json => write_atomic(&path, &to_json_bytes(&plan))?,
            Format::Csv => write_csv_with(&path, |buf| write_stationary_csv(&plan, buf))?,
        }
        let v0: f64 = mdp.initial.iter().zip(&plan.value).map(|(p, v)| p * v).sum();
        return Ok(format!(
            "bellman: stationary V(initial)={:.10} iterations={} -> {}",
            v0,
            plan.iterations,
            path.display()
        ));
    }
    let horizon = a
        .horizon
        .or(mdp.horizon)
        .ok_or_else(|| CliError::Config("finite-horizon solve needs `horizon`".into()))?;
    match soft_bellman_finite(&mdp, lambda, horizon, a.tol, a.max_iter) {
        Ok(plan) => {
            write_plan(&plan, a.format, &path)?;
            let hard = classical_dp_finite(&mdp, horizon).context("classical DP")?;
            let hard_v0: f64 = mdp.initial.iter().zip(&hard.values[0]).map(|(p, v)| p * v).sum();
            Ok(format!(
                "bellman: T={} objective={:.10} I_total={} V0={:.10} (classical {:.10}) outer={} -> {}",
                horizon,
                plan.total_objective,
                info(plan.total_info, env.bits),
                plan.initial_value(),
                hard_v0,
                plan.outer_iterations,
                path.display()
            ))
        }
        Err(BpriError::MaxOuterExceeded { iterations, change, best }) => {
            write_plan(&best, a.format, &path)?;
            Err(CliError::Failed(format!(
                "bellman: no convergence after {iterations} outer passes (change {change:e}); last plan -> {}",
                path.display()
            )))
        }
        Err(e) => Err(e).context("bellman"),
    }
}

pub fn selftest_cmd(a: &SelftestArgs, env: &Env) -> CliResult<String> {
    let results = selftest::run_all(a.seed);
    for r in &results {
        eprintln!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    let path = env.path(&a.out);
    write_atomic(&path, &to_json_bytes(&results))?;
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::Failed(format!(
            "selftest: {failed} of {} properties failed -> {}",
            results.len(),
            path.display()
        )));
    }
    Ok(format!("selftest: {} properties passed -> {}", results.len(), path.display()))
}
