//! Deterministic Blahut–Arimoto iteration for the price problem, the
//! capacity-constrained problem by bisection on `λ`, and frontier tracing.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{BpriError, Result};
use crate::gibbs::{expected_loss, gibbs_row, gibbs_update, log_weights, LogPartition, PriceParam};
use crate::prob::{entropy, log_sum_exp, induced_marginal, kl, mutual_information, Channel, LossMatrix, Marginal, Prior};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Weight of the uniform component mixed into warm starts so that every
/// report keeps positive mass.
pub const WARM_START_MIX: f64 = 1e-3;

/// Converged fixed point at a given price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsSolution {
    pub channel: Channel,
    pub marginal: Marginal,
    pub log_z: LogPartition,
    pub lambda: PriceParam,
    pub expected_loss: f64,
    pub mutual_info: f64,
    pub objective_value: f64,
    pub iterations: usize,
    /// Sup-norm change of the marginal on the last iteration.
    pub residual: f64,
    /// States with zero prior mass; their channel rows are uniform.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped_states: Vec<usize>,
    /// Iterations on which the objective went up (should stay zero).
    #[serde(default)]
    pub descent_violations: usize,
}

#[derive(Debug, Clone)]
pub struct BaOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting marginal; uniform when `None`.
    pub init: Option<Marginal>,
}

impl Default for BaOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER, init: None }
    }
}

/// Interior starting point near `q`: `(1 - ε) q + ε · uniform`.
pub fn interior_warm_start(q: &Marginal) -> Marginal {
    let n = q.len() as f64;
    Marginal::from_raw(
        q.as_slice()
            .iter()
            .map(|v| (1.0 - WARM_START_MIX) * v + WARM_START_MIX / n)
            .collect(),
    )
}

/// One application of the Blahut–Arimoto map `q ↦ Σ_x p(x) f_q(·|x)`.
pub fn ba_operator(prior: &Prior, loss: &LossMatrix, lambda: PriceParam, q: &Marginal) -> Result<Marginal> {
    loss.check_dims(prior.len(), Some(q.len()))?;
    let (f, _) = gibbs_update(loss, q, lambda)?;
    induced_marginal(prior, &f)
}

/// Blahut–Arimoto from the uniform marginal.
pub fn ba_solve(
    prior: &Prior,
    loss: &LossMatrix,
    lambda: PriceParam,
    tol: f64,
    max_iter: usize,
) -> Result<GibbsSolution> {
    ba_solve_with(prior, loss, lambda, &BaOptions { tol, max_iter, init: None })
}

pub fn ba_solve_with(
    prior: &Prior,
    loss: &LossMatrix,
    lambda: PriceParam,
    opts: &BaOptions,
) -> Result<GibbsSolution> {
    loss.check_dims(prior.len(), None)?;
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(BpriError::InvalidParameter(format!(
            "need tol > 0 and max_iter >= 1 (got {}, {})",
            opts.tol, opts.max_iter
        )));
    }
    let n_y = loss.n_y();
    let mut q = match &opts.init {
        Some(init) => {
            if init.len() != n_y {
                return Err(BpriError::DimensionMismatch(format!(
                    "initial marginal has {} entries, loss has {n_y} reports",
                    init.len()
                )));
            }
            init.clone()
        }
        None => Marginal::uniform(n_y)?,
    };

    let support = prior.support();
    let dropped: Vec<usize> = (0..prior.len()).filter(|x| !support.contains(x)).collect();
    if !dropped.is_empty() {
        warn!("dropping {} zero-prior state(s) before solving: {:?}", dropped.len(), dropped);
    }
    let (red_prior, red_loss) = if dropped.is_empty() {
        (prior.clone(), loss.clone())
    } else {
        let w: Vec<f64> = support.iter().map(|&x| prior[x]).collect();
        (Prior::from_weights(&w)?, loss.select_rows(&support))
    };

    if let Some(y0) = uninformative_optimum(&red_prior, &red_loss, lambda) {
        debug!("state-independent report {y0} is optimal at lambda = {}", lambda.lambda());
        let point = Marginal::point_mass(n_y, y0)?;
        let f = Channel::constant(red_prior.len(), &point);
        let log_z = LogPartition(
            (0..red_prior.len())
                .map(|x| -lambda.lambda() * red_loss.get(x, y0))
                .collect(),
        );
        return assemble(prior, loss, lambda, &support, &dropped, f, log_z, &point, point.clone(), 0, 0.0, 0);
    }

    let mut prev_objective = f64::INFINITY;
    let mut violations = 0usize;
    let mut residual = f64::INFINITY;
    let mut last: Option<(Channel, LogPartition, Marginal)> = None;

    for iter in 1..=opts.max_iter {
        let (f, log_z) = gibbs_update(&red_loss, &q, lambda)?;
        let q_next = induced_marginal(&red_prior, &f)?;
        residual = q_next
            .as_slice()
            .iter()
            .zip(q.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);

        // E ℓ + λ⁻¹ I(f) = -λ⁻¹ E log Z - λ⁻¹ KL(q_next ‖ q) for a Gibbs channel
        let drift = kl(q_next.as_slice(), q.as_slice())?;
        let mean_log_z: f64 = red_prior.as_slice().iter().zip(&log_z.0).map(|(p, z)| p * z).sum();
        let obj = -lambda.price() * (mean_log_z + drift);
        if obj > prev_objective + 1e-12 * (1.0 + obj.abs()) {
            violations += 1;
            debug!("objective increased at iteration {iter}: {prev_objective} -> {obj}");
        }
        prev_objective = obj;

        if residual < opts.tol {
            let sol = assemble(prior, loss, lambda, &support, &dropped, f, log_z, &q, q_next, iter, residual, violations)?;
            return Ok(sol);
        }
        last = Some((f, log_z, q.clone()));
        q = q_next;
        if iter == opts.max_iter {
            break;
        }
    }

    let (f, log_z, q_prev) = last.expect("max_iter >= 1");
    let best = assemble(prior, loss, lambda, &support, &dropped, f, log_z, &q_prev, q, opts.max_iter, residual, violations)?;
    Err(BpriError::MaxIterExceeded {
        iterations: opts.max_iter,
        residual,
        best: Box::new(best),
    })
}

/// Report `y0` minimizing `E_p[ℓ(X, y)]` when the point mass on it is the
/// unique optimum, i.e. `Σ_x p(x) exp(-λ(ℓ(x,y) - ℓ(x,y0))) < 1` for every
/// `y != y0`. Plain iteration approaches this corner at a rate proportional
/// to `λ`, so it is checked directly.
fn uninformative_optimum(prior: &Prior, loss: &LossMatrix, lambda: PriceParam) -> Option<usize> {
    let n_y = loss.n_y();
    let mean_loss = |y: usize| (0..prior.len()).map(|x| prior[x] * loss.get(x, y)).sum::<f64>();
    let y0 = (0..n_y).min_by(|&a, &b| mean_loss(a).total_cmp(&mean_loss(b)))?;
    let l = lambda.lambda();
    let mut terms = vec![0.0; prior.len()];
    for y in (0..n_y).filter(|&y| y != y0) {
        for (x, t) in terms.iter_mut().enumerate() {
            *t = prior[x].ln() - l * (loss.get(x, y) - loss.get(x, y0));
        }
        if log_sum_exp(&terms) >= -8.0 * f64::EPSILON {
            return None;
        }
    }
    Some(y0)
}

/// Re-expands a reduced-state solution to the full state space.
#[allow(clippy::too_many_arguments)]
fn assemble(
    prior: &Prior,
    loss: &LossMatrix,
    lambda: PriceParam,
    support: &[usize],
    dropped: &[usize],
    f_red: Channel,
    log_z_red: LogPartition,
    q_used: &Marginal,
    marginal: Marginal,
    iterations: usize,
    residual: f64,
    descent_violations: usize,
) -> Result<GibbsSolution> {
    let n_y = loss.n_y();
    let (channel, log_z) = if dropped.is_empty() {
        (f_red, log_z_red)
    } else {
        let mut data = vec![1.0 / n_y as f64; prior.len() * n_y];
        let mut log_z = vec![0.0; prior.len()];
        let mut scratch = vec![0.0; n_y];
        let log_q = log_weights(q_used.as_slice());
        for (x, lz) in log_z.iter_mut().enumerate() {
            *lz = gibbs_row(loss.row(x), &log_q, lambda.lambda(), &mut scratch);
        }
        for (k, &x) in support.iter().enumerate() {
            data[x * n_y..(x + 1) * n_y].copy_from_slice(f_red.row(k));
            log_z[x] = log_z_red.0[k];
        }
        (Channel::from_raw(prior.len(), n_y, data), LogPartition(log_z))
    };
    let el = expected_loss(prior, loss, &channel)?;
    let mi = mutual_information(prior, &channel)?;
    Ok(GibbsSolution {
        channel,
        marginal,
        log_z,
        lambda,
        expected_loss: el,
        mutual_info: mi,
        objective_value: el + lambda.price() * mi,
        iterations,
        residual,
        dropped_states: dropped.to_vec(),
        descent_violations,
    })
}

/// Indices `y` with `q(y) > eps`.
pub fn support_set(q: &Marginal, eps: f64) -> Vec<usize> {
    q.as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > eps)
        .map(|(i, _)| i)
        .collect()
}

/// Sup-norm of `G(q) - q` for a solution's marginal.
pub fn stationarity_residual(prior: &Prior, loss: &LossMatrix, sol: &GibbsSolution) -> Result<f64> {
    let next = ba_operator(prior, loss, sol.lambda, &sol.marginal)?;
    Ok(next
        .as_slice()
        .iter()
        .zip(sol.marginal.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// Capacity formulation
// ---------------------------------------------------------------------------

/// Smallest and largest `λ` the capacity search will try.
pub const LAMBDA_FLOOR: f64 = 1e-12;
pub const LAMBDA_CEIL: f64 = 1e12;
const MAX_BISECTIONS: usize = 60;
const MONOTONE_SLACK: f64 = 1e-9;
const FALLBACK_GRID: usize = 400;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum CapacityOutcome {
    /// A single Gibbs channel meets the capacity.
    Matched(GibbsSolution),
    /// The frontier has a kink at this capacity: mix `low` with weight
    /// `alpha` and `high` with `1 - alpha`.
    Mixture {
        low: GibbsSolution,
        high: GibbsSolution,
        alpha: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapacitySolution {
    pub outcome: CapacityOutcome,
    pub kappa: f64,
    /// `λ` of the matched solution, or the geometric midpoint of the kink bracket.
    pub lambda: f64,
    pub bisections: usize,
    /// Set when bisection saw a non-monotone `I(λ)` and a grid scan was used.
    pub non_monotone_fallback: bool,
}

impl CapacitySolution {
    pub fn is_mixture(&self) -> bool {
        matches!(self.outcome, CapacityOutcome::Mixture { .. })
    }

    /// Information and expected loss of the (possibly mixed) optimizer.
    pub fn info_and_loss(&self) -> (f64, f64) {
        match &self.outcome {
            CapacityOutcome::Matched(s) => (s.mutual_info, s.expected_loss),
            CapacityOutcome::Mixture { low, high, alpha } => (
                alpha * low.mutual_info + (1.0 - alpha) * high.mutual_info,
                alpha * low.expected_loss + (1.0 - alpha) * high.expected_loss,
            ),
        }
    }

    pub fn matched(&self) -> Option<&GibbsSolution> {
        match &self.outcome {
            CapacityOutcome::Matched(s) => Some(s),
            CapacityOutcome::Mixture { .. } => None,
        }
    }
}

/// Solves `min E[ℓ]` subject to `I(X;Y) <= κ` by bisection on `λ`.
pub fn solve_capacity(
    prior: &Prior,
    loss: &LossMatrix,
    kappa: f64,
    tol_kappa: f64,
    tol_fp: f64,
) -> Result<CapacitySolution> {
    let h = entropy(prior.as_slice())?;
    if !(kappa >= 0.0) || kappa > h + tol_kappa {
        return Err(BpriError::CapacityOutOfRange { kappa, max: h });
    }
    let solve = |l: f64| -> Result<GibbsSolution> {
        ba_solve(prior, loss, PriceParam::new(l)?, tol_fp, DEFAULT_MAX_ITER)
    };
    let matched = |sol: GibbsSolution, bisections| CapacitySolution {
        lambda: sol.lambda.lambda(),
        outcome: CapacityOutcome::Matched(sol),
        kappa,
        bisections,
        non_monotone_fallback: false,
    };

    let mut lo = 1.0;
    let mut lo_sol = solve(lo)?;
    if (lo_sol.mutual_info - kappa).abs() < tol_kappa {
        return Ok(matched(lo_sol, 0));
    }
    let mut hi = lo;
    let mut hi_sol = lo_sol.clone();
    if lo_sol.mutual_info < kappa {
        while hi_sol.mutual_info < kappa {
            if hi >= LAMBDA_CEIL {
                return Err(BpriError::CapacityOutOfRange { kappa, max: hi_sol.mutual_info });
            }
            lo = hi;
            lo_sol = hi_sol;
            hi = (hi * 4.0).min(LAMBDA_CEIL);
            hi_sol = solve(hi)?;
            if (hi_sol.mutual_info - kappa).abs() < tol_kappa {
                return Ok(matched(hi_sol, 0));
            }
        }
    } else {
        while lo_sol.mutual_info > kappa {
            if lo <= LAMBDA_FLOOR {
                return Ok(matched(lo_sol, 0));
            }
            hi = lo;
            hi_sol = lo_sol;
            lo = (lo / 4.0).max(LAMBDA_FLOOR);
            lo_sol = solve(lo)?;
            if (lo_sol.mutual_info - kappa).abs() < tol_kappa {
                return Ok(matched(lo_sol, 0));
            }
        }
    }

    let (bracket_lo, bracket_hi) = (lo, hi);
    for k in 1..=MAX_BISECTIONS {
        let mid = (lo * hi).sqrt();
        let mid_sol = solve(mid)?;
        let i = mid_sol.mutual_info;
        if i < lo_sol.mutual_info - MONOTONE_SLACK || i > hi_sol.mutual_info + MONOTONE_SLACK {
            warn!("non-monotone I(lambda) inside [{lo}, {hi}]; falling back to grid scan");
            return grid_fallback(prior, loss, kappa, tol_fp, bracket_lo, bracket_hi, k);
        }
        if (i - kappa).abs() < tol_kappa {
            return Ok(matched(mid_sol, k));
        }
        if i < kappa {
            lo = mid;
            lo_sol = mid_sol;
        } else {
            hi = mid;
            hi_sol = mid_sol;
        }
    }

    // The information level jumps across κ inside a vanishing λ interval.
    let alpha = (hi_sol.mutual_info - kappa) / (hi_sol.mutual_info - lo_sol.mutual_info);
    debug!("kink detected near lambda = {}; mixing weight {alpha}", (lo * hi).sqrt());
    Ok(CapacitySolution {
        outcome: CapacityOutcome::Mixture { low: lo_sol, high: hi_sol, alpha },
        kappa,
        lambda: (lo * hi).sqrt(),
        bisections: MAX_BISECTIONS,
        non_monotone_fallback: false,
    })
}

fn grid_fallback(
    prior: &Prior,
    loss: &LossMatrix,
    kappa: f64,
    tol_fp: f64,
    lo: f64,
    hi: f64,
    bisections: usize,
) -> Result<CapacitySolution> {
    let mut best: Option<GibbsSolution> = None;
    for k in 0..FALLBACK_GRID {
        let l = lo * (hi / lo).powf(k as f64 / (FALLBACK_GRID - 1) as f64);
        let sol = ba_solve(prior, loss, PriceParam::new(l)?, tol_fp, DEFAULT_MAX_ITER)?;
        let better = best
            .as_ref()
            .is_none_or(|b| (sol.mutual_info - kappa).abs() < (b.mutual_info - kappa).abs());
        if better {
            best = Some(sol);
        }
    }
    let sol = best.expect("grid is nonempty");
    Ok(CapacitySolution {
        lambda: sol.lambda.lambda(),
        outcome: CapacityOutcome::Matched(sol),
        kappa,
        bisections,
        non_monotone_fallback: true,
    })
}

// ---------------------------------------------------------------------------
// Frontier
// ---------------------------------------------------------------------------

/// One point `(λ, κ = I*, E[ℓ*])` of the utility–capacity frontier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub lambda: f64,
    pub kappa: f64,
    pub expected_loss: f64,
}

#[derive(Debug, Clone)]
pub struct FrontierOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Start each solve from the previous point's marginal.
    pub warm_start: bool,
}

impl Default for FrontierOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER, warm_start: true }
    }
}

pub fn trace_frontier(prior: &Prior, loss: &LossMatrix, lambda_grid: &[f64]) -> Result<Vec<FrontierPoint>> {
    trace_frontier_with(prior, loss, lambda_grid, &FrontierOptions::default())
}

pub fn trace_frontier_with(
    prior: &Prior,
    loss: &LossMatrix,
    lambda_grid: &[f64],
    opts: &FrontierOptions,
) -> Result<Vec<FrontierPoint>> {
    if lambda_grid.is_empty() {
        return Err(BpriError::InvalidParameter("empty lambda grid".into()));
    }
    if lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BpriError::InvalidParameter("lambda grid must be strictly increasing".into()));
    }
    let mut points = Vec::with_capacity(lambda_grid.len());
    let mut warm: Option<Marginal> = None;
    for &l in lambda_grid {
        let ba = BaOptions {
            tol: opts.tol,
            max_iter: opts.max_iter,
            init: warm.as_ref().map(interior_warm_start),
        };
        let sol = ba_solve_with(prior, loss, PriceParam::new(l)?, &ba)?;
        points.push(FrontierPoint {
            lambda: l,
            kappa: sol.mutual_info,
            expected_loss: sol.expected_loss,
        });
        if opts.warm_start {
            warm = Some(sol.marginal);
        }
    }
    points.sort_by(|a, b| a.kappa.total_cmp(&b.kappa));
    let curv = frontier_min_slope_increment(&points);
    if curv < -1e-6 {
        warn!("traced frontier is not convex in kappa (min slope increment {curv:e})");
    }
    Ok(points)
}

/// Chord slopes `ΔE[ℓ]/Δκ` between consecutive points, skipping pairs whose
/// κ gap is below `1e-9`.
pub fn frontier_slopes(points: &[FrontierPoint]) -> Vec<(usize, f64)> {
    points
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].kappa - w[0].kappa > 1e-9)
        .map(|(i, w)| (i, (w[1].expected_loss - w[0].expected_loss) / (w[1].kappa - w[0].kappa)))
        .collect()
}

/// Smallest increment between successive chord slopes; nonnegative for a
/// loss curve that is convex in κ. Returns `+inf` with fewer than two slopes.
pub fn frontier_min_slope_increment(points: &[FrontierPoint]) -> f64 {
    frontier_slopes(points)
        .windows(2)
        .map(|w| w[1].1 - w[0].1)
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lam(v: f64) -> PriceParam {
        PriceParam::new(v).unwrap()
    }

    fn binary_entropy(d: f64) -> f64 {
        -(d * d.ln() + (1.0 - d) * (1.0 - d).ln())
    }

    #[test]
    fn constant_loss_converges_immediately() {
        let prior = Prior::new(vec![0.3, 0.7]).unwrap();
        let loss = LossMatrix::new(vec![vec![1.0; 3]; 2]).unwrap();
        let sol = ba_solve(&prior, &loss, lam(2.0), 1e-10, 100).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.mutual_info, 0.0);
        for row in sol.channel.rows() {
            for v in row {
                assert!((v - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn tiny_lambda_is_uninformative() {
        let prior = Prior::new(vec![0.2, 0.5, 0.3]).unwrap();
        let loss = LossMatrix::new(vec![vec![0.0, 1.0, 3.0], vec![2.0, 0.2, 1.0], vec![1.0, 1.5, 0.0]]).unwrap();
        let sol = ba_solve(&prior, &loss, lam(1e-12), 1e-10, 100_000).unwrap();
        assert!(sol.mutual_info < 1e-9);
        // best state-independent action
        let best: f64 = (0..3)
            .map(|y| (0..3).map(|x| prior[x] * loss.get(x, y)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        assert!((sol.expected_loss - best).abs() < 1e-9);
    }

    #[test]
    fn binary_hamming_matches_rate_distortion() {
        let prior = Prior::uniform(2).unwrap();
        let loss = LossMatrix::hamming(2);
        for &l in &[0.5, 1.0, 2.0, 4.0] {
            let sol = ba_solve(&prior, &loss, lam(l), 1e-12, 10_000).unwrap();
            let d = sol.expected_loss;
            let r = 2f64.ln() - binary_entropy(d);
            assert!((sol.mutual_info - r).abs() / 2f64.ln() < 1e-4);
            assert!((d - 1.0 / (1.0 + l.exp())).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_prior_states_are_reinserted_uniform() {
        let prior = Prior::new(vec![0.5, 0.0, 0.5]).unwrap();
        let loss = LossMatrix::hamming(3);
        let sol = ba_solve(&prior, &loss, lam(3.0), 1e-10, 10_000).unwrap();
        assert_eq!(sol.dropped_states, vec![1]);
        for v in sol.channel.row(1) {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(sol.log_z.0[1].is_finite());
    }

    #[test]
    fn max_iter_returns_best_iterate() {
        let prior = Prior::new(vec![0.2, 0.8]).unwrap();
        let loss = LossMatrix::new(vec![vec![0.0, 1.0, 0.4], vec![1.0, 0.0, 0.6]]).unwrap();
        match ba_solve(&prior, &loss, lam(2.0), 1e-14, 3) {
            Err(BpriError::MaxIterExceeded { iterations, best, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(best.iterations, 3);
            }
            other => panic!("expected MaxIterExceeded, got {other:?}"),
        }
    }

    #[test]
    fn support_set_examples() {
        let q = Marginal::uniform(4).unwrap();
        assert_eq!(support_set(&q, 1e-12), vec![0, 1, 2, 3]);
        let q = Marginal::point_mass(3, 0).unwrap();
        assert_eq!(support_set(&q, 0.0), vec![0]);
    }

    #[test]
    fn capacity_inverts_binary_rate_distortion() {
        let prior = Prior::uniform(2).unwrap();
        let loss = LossMatrix::hamming(2);
        let kappa = 2f64.ln() - binary_entropy(0.1);
        let sol = solve_capacity(&prior, &loss, kappa, 1e-10, 1e-13).unwrap();
        let (i, d) = sol.info_and_loss();
        assert!((i - kappa).abs() < 1e-10);
        assert!((d - 0.1).abs() < 1e-6, "{d}");
        assert!((0.3681 - kappa).abs() < 1e-4);
    }

    #[test]
    fn capacity_zero_is_uninformative() {
        let prior = Prior::new(vec![0.3, 0.7]).unwrap();
        let loss = LossMatrix::hamming(2);
        let sol = solve_capacity(&prior, &loss, 0.0, 1e-9, 1e-12).unwrap();
        let (i, _) = sol.info_and_loss();
        assert!(i < 1e-9);
    }

    #[test]
    fn capacity_out_of_range() {
        let prior = Prior::uniform(2).unwrap();
        let loss = LossMatrix::hamming(2);
        assert!(matches!(
            solve_capacity(&prior, &loss, 1.0, 1e-9, 1e-12),
            Err(BpriError::CapacityOutOfRange { .. })
        ));
        assert!(solve_capacity(&prior, &loss, -0.1, 1e-9, 1e-12).is_err());
    }

    #[test]
    fn full_capacity_gives_identity_like_channel() {
        let prior = Prior::new(vec![0.2, 0.3, 0.5]).unwrap();
        let loss = LossMatrix::hamming(3);
        let h = entropy(prior.as_slice()).unwrap();
        let sol = solve_capacity(&prior, &loss, h, 1e-6, 1e-12).unwrap();
        let (_, d) = sol.info_and_loss();
        assert!(d < 1e-5, "{d}");
    }

    #[test]
    fn frontier_rejects_bad_grid() {
        let prior = Prior::uniform(2).unwrap();
        let loss = LossMatrix::hamming(2);
        assert!(trace_frontier(&prior, &loss, &[1.0, 1.0]).is_err());
        assert!(trace_frontier(&prior, &loss, &[]).is_err());
        let pts = trace_frontier(&prior, &loss, &[1e-12]).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].kappa < 1e-12);
        assert!((pts[0].expected_loss - 0.5).abs() < 1e-9);
    }
}
