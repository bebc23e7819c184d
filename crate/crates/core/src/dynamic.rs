//! Information-priced dynamic programming on finite MDPs.
//!
//! Each stage is a static problem whose loss is the action value `Q_t` and
//! whose prior is the state law at `t`. The action marginal `π̄_t` depends on
//! the state law, which depends on earlier policies, so the finite-horizon
//! solver alternates a backward Bellman pass with a forward propagation pass
//! until the state laws stop moving.

use std::io::{Read, Write};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::ba::{ba_solve_with, interior_warm_start, BaOptions, DEFAULT_MAX_ITER};
use crate::error::{BpriError, Result};
use crate::gibbs::{gibbs_update, PriceParam};
use crate::prob::{induced_marginal, mutual_information, Channel, LossMatrix, Marginal, Prior, SIMPLEX_TOL};

/// Weight on the new state law in the outer loop.
pub const STATE_DAMPING: f64 = 0.5;
/// Tolerance for the long-run occupancy power iteration.
pub const OCCUPANCY_TOL: f64 = 1e-12;
const OCCUPANCY_MAX_ITER: usize = 1_000_000;
/// Slack on the discount factor in the contraction check.
pub const CONTRACTION_SLACK: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `P(s'|s,a)` flattened as `[s][a][s']`.
    pub transition: Vec<f64>,
    /// `ℓ(s,a)` flattened as `[s][a]`.
    pub stage_loss: Vec<f64>,
    pub terminal_loss: Vec<f64>,
    pub initial: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

impl FiniteMdp {
    pub fn validate(&self) -> Result<()> {
        let (ns, na) = (self.n_states, self.n_actions);
        if ns == 0 || na == 0 {
            return Err(BpriError::InvalidParameter("need at least one state and one action".into()));
        }
        let expect = |what: &str, got: usize, want: usize| -> Result<()> {
            if got == want {
                Ok(())
            } else {
                Err(BpriError::DimensionMismatch(format!("{what} has {got} entries, expected {want}")))
            }
        };
        expect("transition", self.transition.len(), ns * na * ns)?;
        expect("stage_loss", self.stage_loss.len(), ns * na)?;
        expect("terminal_loss", self.terminal_loss.len(), ns)?;
        expect("initial", self.initial.len(), ns)?;
        for (i, row) in self.transition.chunks(ns).enumerate() {
            if row.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(BpriError::NonSimplexInput(format!(
                    "transition row (s={}, a={}) has a negative or non-finite entry",
                    i / na,
                    i % na
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(BpriError::NonSimplexInput(format!(
                    "transition row (s={}, a={}) sums to {sum}",
                    i / na,
                    i % na
                )));
            }
        }
        for (i, v) in self.stage_loss.iter().enumerate() {
            if !v.is_finite() {
                return Err(BpriError::NonFiniteLoss { row: i / na, col: i % na });
            }
        }
        if let Some(i) = self.terminal_loss.iter().position(|v| !v.is_finite()) {
            return Err(BpriError::NonFiniteLoss { row: i, col: 0 });
        }
        Prior::new(self.initial.clone())?;
        if let Some(b) = self.discount {
            if !(b > 0.0 && b < 1.0) {
                return Err(BpriError::InvalidParameter(format!("discount must lie in (0, 1), got {b}")));
            }
        }
        Ok(())
    }

    pub fn from_json_reader<R: Read>(reader: R) -> Result<Self> {
        let mdp: Self = serde_json::from_reader(reader)?;
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let mdp: Self = serde_json::from_str(s)?;
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let ns = self.n_states;
        let start = (s * self.n_actions + a) * ns;
        &self.transition[start..start + ns]
    }

    pub fn loss(&self, s: usize, a: usize) -> f64 {
        self.stage_loss[s * self.n_actions + a]
    }

    pub fn initial_prior(&self) -> Result<Prior> {
        Prior::new(self.initial.clone())
    }

    /// `Q(s,a) = ℓ(s,a) + β Σ_{s'} P(s'|s,a) V(s')`.
    pub fn q_values(&self, next_value: &[f64], beta: f64) -> LossMatrix {
        let rows = (0..self.n_states)
            .map(|s| {
                (0..self.n_actions)
                    .map(|a| {
                        let cont: f64 = self.transition_row(s, a).iter().zip(next_value).map(|(p, v)| p * v).sum();
                        self.loss(s, a) + beta * cont
                    })
                    .collect()
            })
            .collect();
        LossMatrix::new(rows).expect("finite losses were validated")
    }

    /// State law one step after `state` under `policy`.
    pub fn propagate(&self, state: &[f64], policy: &Channel) -> Vec<f64> {
        let mut next = vec![0.0; self.n_states];
        for (s, &w) in state.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for a in 0..self.n_actions {
                let pa = w * policy.get(s, a);
                if pa == 0.0 {
                    continue;
                }
                for (n, p) in next.iter_mut().zip(self.transition_row(s, a)) {
                    *n += pa * p;
                }
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        next
    }

    /// Long-run state law from `initial` under `policy`, via the lazy chain
    /// `d ← (d + d P_π) / 2` (aperiodic, same limit).
    pub fn occupancy(&self, policy: &Channel) -> Vec<f64> {
        let mut d = self.initial.clone();
        for _ in 0..OCCUPANCY_MAX_ITER {
            let step = self.propagate(&d, policy);
            let next: Vec<f64> = d.iter().zip(&step).map(|(a, b)| 0.5 * (a + b)).collect();
            let change = next.iter().zip(&d).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            d = next;
            if change < OCCUPANCY_TOL {
                return d;
            }
        }
        warn!("occupancy power iteration hit {OCCUPANCY_MAX_ITER} steps");
        d
    }
}

/// One stage of a soft plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftStage {
    pub policy: Channel,
    pub marginal: Marginal,
    /// `Q_t(s,a)` flattened as `[s][a]`.
    pub q_values: Vec<f64>,
    pub value: Vec<f64>,
    pub state_marginal: Prior,
    pub mutual_info: f64,
    pub expected_stage_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftPlan {
    pub lambda: PriceParam,
    pub stages: Vec<SoftStage>,
    pub terminal_state_marginal: Prior,
    /// `E[Σ_t ℓ + terminal] + λ⁻¹ Σ_t I(S_t; A_t)`.
    pub total_objective: f64,
    pub total_info: f64,
    pub outer_iterations: usize,
    /// Largest state-law change on the final outer pass.
    pub change: f64,
}

impl SoftPlan {
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    /// Expected soft value at `t = 0` under the initial law.
    pub fn initial_value(&self) -> f64 {
        let s0 = &self.stages[0];
        s0.state_marginal.as_slice().iter().zip(&s0.value).map(|(p, v)| p * v).sum()
    }

    /// CSV with columns `t, state, action, prob, Q, V`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "state", "action", "prob", "Q", "V"])?;
        for (t, stage) in self.stages.iter().enumerate() {
            let na = stage.policy.n_y();
            for s in 0..stage.policy.n_x() {
                for a in 0..na {
                    w.write_record([
                        t.to_string(),
                        s.to_string(),
                        a.to_string(),
                        format!("{:.16e}", stage.policy.get(s, a)),
                        format!("{:.16e}", stage.q_values[s * na + a]),
                        format!("{:.16e}", stage.value[s]),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

struct StageSolve {
    policy: Channel,
    marginal: Marginal,
    value: Vec<f64>,
}

/// Static stage problem: solve for the marginal, then rebuild every policy
/// row (including states with zero mass) as the Gibbs tilt of that marginal.
fn solve_stage(
    state_law: &Prior,
    q: &LossMatrix,
    lambda: PriceParam,
    tol: f64,
    warm: Option<&Marginal>,
) -> Result<StageSolve> {
    let opts = BaOptions {
        tol,
        max_iter: DEFAULT_MAX_ITER,
        init: warm.map(interior_warm_start),
    };
    let sol = ba_solve_with(state_law, q, lambda, &opts)?;
    let (policy, log_z) = gibbs_update(q, &sol.marginal, lambda)?;
    let value = log_z.0.iter().map(|z| -lambda.price() * z).collect();
    Ok(StageSolve { policy, marginal: sol.marginal, value })
}

fn expected_stage_loss(mdp: &FiniteMdp, state: &[f64], policy: &Channel) -> f64 {
    let mut total = 0.0;
    for (s, &w) in state.iter().enumerate() {
        for a in 0..mdp.n_actions {
            total += w * policy.get(s, a) * mdp.loss(s, a);
        }
    }
    total
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Finite-horizon soft Bellman recursion with self-consistent action
/// marginals.
///
/// Each outer pass runs backward induction against the current state laws
/// and then propagates new state laws forward from `initial`; the state
/// laws are updated with damping [`STATE_DAMPING`]. Stops when the largest
/// change in any state law is below `tol`.
pub fn soft_bellman_finite(
    mdp: &FiniteMdp,
    lambda: PriceParam,
    horizon: usize,
    tol: f64,
    max_outer: usize,
) -> Result<SoftPlan> {
    mdp.validate()?;
    if horizon == 0 {
        return Err(BpriError::InvalidParameter("horizon must be at least 1".into()));
    }
    if !(tol > 0.0) || max_outer == 0 {
        return Err(BpriError::InvalidParameter("need tol > 0 and max_outer >= 1".into()));
    }
    let ns = mdp.n_states;
    let uniform = Channel::constant(ns, &Marginal::uniform(mdp.n_actions)?);
    let mut laws: Vec<Vec<f64>> = Vec::with_capacity(horizon + 1);
    laws.push(mdp.initial.clone());
    for t in 0..horizon {
        let next = mdp.propagate(&laws[t], &uniform);
        laws.push(next);
    }

    let mut warm: Vec<Option<Marginal>> = vec![None; horizon];
    let mut best: Option<SoftPlan> = None;
    for outer in 1..=max_outer {
        let mut stages: Vec<Option<SoftStage>> = vec![None; horizon];
        let mut next_value = mdp.terminal_loss.clone();
        for t in (0..horizon).rev() {
            let q = mdp.q_values(&next_value, 1.0);
            let law = Prior::new(laws[t].clone())?;
            let stage = solve_stage(&law, &q, lambda, tol, warm[t].as_ref())?;
            warm[t] = Some(stage.marginal.clone());
            next_value = stage.value.clone();
            stages[t] = Some(SoftStage {
                mutual_info: mutual_information(&law, &stage.policy)?,
                expected_stage_loss: expected_stage_loss(mdp, &laws[t], &stage.policy),
                policy: stage.policy,
                marginal: stage.marginal,
                q_values: q.to_rows().concat(),
                value: stage.value,
                state_marginal: law,
            });
        }
        let stages: Vec<SoftStage> = stages.into_iter().map(|s| s.expect("every stage solved")).collect();

        let mut change: f64 = 0.0;
        let mut fresh = mdp.initial.clone();
        for t in 0..horizon {
            fresh = mdp.propagate(&fresh, &stages[t].policy);
            change = change.max(max_abs_diff(&fresh, &laws[t + 1]));
            let damped: Vec<f64> = laws[t + 1]
                .iter()
                .zip(&fresh)
                .map(|(old, new)| (1.0 - STATE_DAMPING) * old + STATE_DAMPING * new)
                .collect();
            laws[t + 1] = damped;
        }
        // the terminal law only enters the objective, so use the undamped one
        let terminal_law = if change < tol { fresh } else { laws[horizon].clone() };
        let plan = finish_plan(mdp, lambda, stages, &terminal_law, outer, change)?;
        debug!("soft Bellman pass {outer}: state-law change {change:e}");
        if change < tol {
            return Ok(plan);
        }
        best = Some(plan);
    }
    let best = best.expect("max_outer >= 1");
    Err(BpriError::MaxOuterExceeded {
        iterations: max_outer,
        change: best.change,
        best: Box::new(best),
    })
}

fn finish_plan(
    mdp: &FiniteMdp,
    lambda: PriceParam,
    stages: Vec<SoftStage>,
    terminal_law: &[f64],
    outer_iterations: usize,
    change: f64,
) -> Result<SoftPlan> {
    let total_info: f64 = stages.iter().map(|s| s.mutual_info).sum();
    let stage_losses: f64 = stages.iter().map(|s| s.expected_stage_loss).sum();
    let terminal: f64 = terminal_law.iter().zip(&mdp.terminal_loss).map(|(p, l)| p * l).sum();
    Ok(SoftPlan {
        lambda,
        stages,
        terminal_state_marginal: Prior::new(terminal_law.to_vec())?,
        total_objective: stage_losses + terminal + lambda.price() * total_info,
        total_info,
        outer_iterations,
        change,
    })
}

/// Stationary discounted solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryPlan {
    pub lambda: PriceParam,
    pub discount: f64,
    pub value: Vec<f64>,
    pub policy: Channel,
    pub marginal: Marginal,
    pub occupancy: Prior,
    /// `Q(s,a)` flattened as `[s][a]`.
    pub q_values: Vec<f64>,
    pub iterations: usize,
    pub delta: f64,
    /// Iterations where the sup-norm delta shrank by less than `β + 0.05`.
    pub contraction_violations: usize,
}

/// Soft value iteration for the discounted problem.
///
/// The stage prior at each iteration is the long-run state law of the
/// current policy started from `initial`, damped by [`STATE_DAMPING`]
/// against the previous iteration's prior.
pub fn soft_value_iteration(
    mdp: &FiniteMdp,
    lambda: PriceParam,
    tol: f64,
    max_iter: usize,
) -> Result<StationaryPlan> {
    mdp.validate()?;
    let beta = mdp
        .discount
        .ok_or_else(|| BpriError::InvalidParameter("stationary solve needs a discount".into()))?;
    if !(tol > 0.0) || max_iter == 0 {
        return Err(BpriError::InvalidParameter("need tol > 0 and max_iter >= 1".into()));
    }
    let ns = mdp.n_states;
    let mut value = vec![0.0; ns];
    let mut policy = Channel::constant(ns, &Marginal::uniform(mdp.n_actions)?);
    let mut warm: Option<Marginal> = None;
    let mut prev_delta = f64::INFINITY;
    let mut violations = 0usize;
    let mut delta = f64::INFINITY;
    let mut weights = mdp.occupancy(&policy);
    for iter in 1..=max_iter {
        let q = mdp.q_values(&value, beta);
        if iter > 1 {
            let fresh = mdp.occupancy(&policy);
            weights = weights
                .iter()
                .zip(&fresh)
                .map(|(old, new)| STATE_DAMPING * old + (1.0 - STATE_DAMPING) * new)
                .collect();
        }
        let occupancy = Prior::new(weights.clone())?;
        let stage = solve_stage(&occupancy, &q, lambda, (tol * 1e-2).max(1e-14), warm.as_ref())?;
        delta = max_abs_diff(&stage.value, &value);
        if prev_delta.is_finite() && delta > (beta + CONTRACTION_SLACK) * prev_delta && delta > tol {
            violations += 1;
            debug!("soft value iteration {iter}: delta {delta:e} after {prev_delta:e}");
        }
        prev_delta = delta;
        value = stage.value;
        policy = stage.policy;
        warm = Some(stage.marginal.clone());
        if delta < tol {
            let q = mdp.q_values(&value, beta);
            let occupancy = Prior::new(mdp.occupancy(&policy))?;
            return Ok(StationaryPlan {
                lambda,
                discount: beta,
                value,
                marginal: induced_marginal(&occupancy, &policy)?,
                policy,
                occupancy,
                q_values: q.to_rows().concat(),
                iterations: iter,
                delta,
                contraction_violations: violations,
            });
        }
    }
    Err(BpriError::ValueIterationExceeded { iterations: max_iter, delta })
}

/// Deterministic reference plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalPlan {
    /// `values[t][s]` for `t = 0..=T`; a single row for the discounted case.
    pub values: Vec<Vec<f64>>,
    /// Greedy action per stage and state; ties go to the lowest index.
    pub actions: Vec<Vec<usize>>,
    /// `Q_t(s,a)` flattened as `[s][a]`, one entry per stage.
    pub q_values: Vec<Vec<f64>>,
    pub iterations: usize,
}

fn greedy(q: &LossMatrix) -> (Vec<f64>, Vec<usize>) {
    (0..q.n_x())
        .map(|s| {
            let row = q.row(s);
            let mut best = 0;
            for (a, &v) in row.iter().enumerate() {
                if v < row[best] {
                    best = a;
                }
            }
            (row[best], best)
        })
        .unzip()
}

/// Backward induction with a hard minimum over actions.
pub fn classical_dp_finite(mdp: &FiniteMdp, horizon: usize) -> Result<ClassicalPlan> {
    mdp.validate()?;
    if horizon == 0 {
        return Err(BpriError::InvalidParameter("horizon must be at least 1".into()));
    }
    let mut values = vec![mdp.terminal_loss.clone()];
    let mut actions = Vec::with_capacity(horizon);
    let mut q_values = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let q = mdp.q_values(values.last().expect("nonempty"), 1.0);
        let (v, a) = greedy(&q);
        values.push(v);
        actions.push(a);
        q_values.push(q.to_rows().concat());
    }
    values.reverse();
    actions.reverse();
    q_values.reverse();
    Ok(ClassicalPlan { values, actions, q_values, iterations: horizon })
}

/// Discounted value iteration with a hard minimum over actions.
pub fn classical_value_iteration(mdp: &FiniteMdp, tol: f64, max_iter: usize) -> Result<ClassicalPlan> {
    mdp.validate()?;
    let beta = mdp
        .discount
        .ok_or_else(|| BpriError::InvalidParameter("value iteration needs a discount".into()))?;
    let mut value = vec![0.0; mdp.n_states];
    let mut delta = f64::INFINITY;
    for iter in 1..=max_iter {
        let q = mdp.q_values(&value, beta);
        let (v, _) = greedy(&q);
        delta = max_abs_diff(&v, &value);
        value = v;
        if delta < tol {
            let q = mdp.q_values(&value, beta);
            let (_, a) = greedy(&q);
            return Ok(ClassicalPlan {
                values: vec![value],
                actions: vec![a],
                q_values: vec![q.to_rows().concat()],
                iterations: iter,
            });
        }
    }
    Err(BpriError::ValueIterationExceeded { iterations: max_iter, delta })
}
