//! Closed-form Gaussian specializations: information-priced Stein shrinkage
//! and linear–quadratic–Gaussian attention.
//!
//! The LQG routines return every closed form side by side with a numerical
//! reference. Several textbook expressions for this problem disagree with
//! each other, so nothing here picks one silently; see
//! [`LqgMutualInfo`] and [`ScalarLqgSolution`].

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ba::{ba_solve, GibbsSolution};
use crate::error::{BpriError, Result};
use crate::gibbs::PriceParam;
use crate::prob::{LossMatrix, Prior};
use crate::rng::substream;

/// Golden-section ratio `(√5 - 1) / 2`.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Marginal residual for the discretized oracle. Tail reports decay
/// sublinearly on the grid, so tighter tolerances cost far more iterations
/// without moving `(I, E[loss])`.
pub const ORACLE_TOL: f64 = 1e-6;
pub const ORACLE_MAX_ITER: usize = 200_000;

// ---------------------------------------------------------------------------
// Stein shrinkage
// ---------------------------------------------------------------------------

/// Gaussian mean problem `X ~ N(θ, I_p)` with prior `θ ~ N(0, τ² I_p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteinProblem {
    pub theta: Vec<f64>,
    pub tau2: f64,
}

impl SteinProblem {
    pub fn new(theta: Vec<f64>, tau2: f64) -> Result<Self> {
        if theta.is_empty() {
            return Err(BpriError::InvalidParameter("theta must have p >= 1".into()));
        }
        if !(tau2 > 0.0 && tau2.is_finite()) {
            return Err(BpriError::InvalidParameter(format!("tau2 must be positive, got {tau2}")));
        }
        Ok(Self { theta, tau2 })
    }

    /// `θ = (1, 0.5, 0.25, 0, …, 0)` padded to dimension `p`.
    pub fn sparse(p: usize, tau2: f64) -> Result<Self> {
        let mut theta = vec![0.0; p];
        for (t, v) in theta.iter_mut().zip([1.0, 0.5, 0.25]) {
            *t = v;
        }
        Self::new(theta, tau2)
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn theta_norm2(&self) -> f64 {
        self.theta.iter().map(|t| t * t).sum()
    }
}

fn check_tau2(tau2: f64) -> Result<()> {
    if tau2 > 0.0 && tau2.is_finite() {
        Ok(())
    } else {
        Err(BpriError::InvalidParameter(format!("tau2 must be positive, got {tau2}")))
    }
}

/// `s(λ) = λ / (λ + 1/(2τ²))`.
pub fn stein_shrinkage_factor(lambda: PriceParam, tau2: f64) -> Result<f64> {
    check_tau2(tau2)?;
    let l = lambda.lambda();
    Ok(l / (l + 0.5 / tau2))
}

/// Squared bias `(s-1)²‖θ‖²` and variance `s² p` of the rule `a = s X`.
pub fn stein_risk_terms(lambda: PriceParam, theta: &[f64], tau2: f64) -> Result<(f64, f64)> {
    let s = stein_shrinkage_factor(lambda, tau2)?;
    let norm2: f64 = theta.iter().map(|t| t * t).sum();
    Ok(((s - 1.0) * (s - 1.0) * norm2, s * s * theta.len() as f64))
}

pub fn stein_risk(lambda: PriceParam, theta: &[f64], tau2: f64) -> Result<f64> {
    let (bias2, var) = stein_risk_terms(lambda, theta, tau2)?;
    Ok(bias2 + var)
}

/// Monte Carlo risk `E‖s X - θ‖²` with its standard error.
pub fn shrinkage_risk_mc(s: f64, theta: &[f64], n_rep: usize, seed: u64) -> Result<(f64, f64)> {
    mc_squared_error(theta, n_rep, seed, |x| x.iter_mut().for_each(|v| *v *= s))
}

/// Positive-part James–Stein `(1 - (p-2)/‖X‖²)₊ X`: Monte Carlo risk and standard error.
pub fn js_positive_part_risk_mc(theta: &[f64], n_rep: usize, seed: u64) -> Result<(f64, f64)> {
    let p = theta.len();
    if p < 3 {
        return Err(BpriError::DimensionTooSmall(p));
    }
    mc_squared_error(theta, n_rep, seed, |x| {
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        let shrink = (1.0 - (p as f64 - 2.0) / norm2).max(0.0);
        x.iter_mut().for_each(|v| *v *= shrink);
    })
}

fn mc_squared_error(
    theta: &[f64],
    n_rep: usize,
    seed: u64,
    estimator: impl Fn(&mut [f64]),
) -> Result<(f64, f64)> {
    if n_rep < 2 {
        return Err(BpriError::InvalidParameter("need at least 2 replicates".into()));
    }
    let mut rng = substream(seed, 0);
    let mut x = vec![0.0; theta.len()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_rep {
        for (xi, ti) in x.iter_mut().zip(theta) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *xi = ti + z;
        }
        estimator(&mut x);
        let err: f64 = x.iter().zip(theta).map(|(a, t)| (a - t) * (a - t)).sum();
        sum += err;
        sum_sq += err * err;
    }
    let n = n_rep as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// 40 log-spaced points on `[1e-3, 1e3]`.
pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(1e-3, 1e3, 40)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// Risk-minimizing `λ` over a grid, refined by golden-section search on the
/// bracket around the best grid point. Ties go to the smaller `λ`.
pub fn stein_lambda_star(theta: &[f64], tau2: f64, lambda_grid: &[f64]) -> Result<(f64, f64)> {
    if lambda_grid.is_empty() {
        return Err(BpriError::InvalidParameter("empty lambda grid".into()));
    }
    let risk = |l: f64| -> Result<f64> { stein_risk(PriceParam::new(l)?, theta, tau2) };
    let risks = lambda_grid.iter().map(|&l| risk(l)).collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, &r) in risks.iter().enumerate() {
        let better = r < risks[best] || (r == risks[best] && lambda_grid[i] < lambda_grid[best]);
        if better {
            best = i;
        }
    }
    let lo = lambda_grid[best.saturating_sub(1)];
    let hi = lambda_grid[(best + 1).min(lambda_grid.len() - 1)];
    let (mut l_star, mut r_star) = (lambda_grid[best], risks[best]);
    if hi > lo {
        let (cand, cand_risk) = golden_section(lo, hi, 1e-6, risk)?;
        if cand_risk < r_star {
            l_star = cand;
            r_star = cand_risk;
        }
    }
    Ok((l_star, r_star))
}

/// Minimizes `f` on `[lo, hi]` to relative bracket width `rel_tol`.
fn golden_section(
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
    f: impl Fn(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (hi - lo) > rel_tol * c.abs().max(f64::MIN_POSITIVE) {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteinHighDimRow {
    pub p: usize,
    pub lambda_star: f64,
    pub risk_bpri: f64,
    pub risk_js: f64,
    pub risk_js_se: f64,
    pub risk_mle: f64,
}

/// `λ*(p)`, the BPRI risk at `λ*`, positive-part James–Stein MC risk and
/// MLE risk `p`, for the sparse mean at each dimension.
pub fn stein_highdim(dims: &[usize], tau2: f64, n_rep: usize, seed: u64) -> Result<Vec<SteinHighDimRow>> {
    let grid = default_lambda_grid();
    dims.iter()
        .map(|&p| {
            let prob = SteinProblem::sparse(p, tau2)?;
            let (lambda_star, risk_bpri) = stein_lambda_star(&prob.theta, tau2, &grid)?;
            let (risk_js, risk_js_se) = js_positive_part_risk_mc(&prob.theta, n_rep, seed ^ p as u64)?;
            Ok(SteinHighDimRow {
                p,
                lambda_star,
                risk_bpri,
                risk_js,
                risk_js_se,
                risk_mle: p as f64,
            })
        })
        .collect()
}

/// CSV with columns `p, lambda_star, risk_bpri, risk_js, risk_mle`.
pub fn write_highdim_csv<W: Write>(rows: &[SteinHighDimRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["p", "lambda_star", "risk_bpri", "risk_js", "risk_mle"])?;
    for r in rows {
        w.write_record([
            r.p.to_string(),
            format!("{:.16e}", r.lambda_star),
            format!("{:.16e}", r.risk_bpri),
            format!("{:.16e}", r.risk_js),
            format!("{:.16e}", r.risk_mle),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV of the risk curves `R_p(λ)` with columns `p, lambda, risk`.
pub fn write_risk_curves_csv<W: Write>(dims: &[usize], tau2: f64, lambda_grid: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["p", "lambda", "risk"])?;
    for &p in dims {
        let prob = SteinProblem::sparse(p, tau2)?;
        for &l in lambda_grid {
            let r = stein_risk(PriceParam::new(l)?, &prob.theta, tau2)?;
            w.write_record([p.to_string(), format!("{l:.16e}"), format!("{r:.16e}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Scalar LQG attention
// ---------------------------------------------------------------------------

/// Utility-form objective `-γa²σ² - (1/(2λ)) log(σ_x²/σ²)` of choosing
/// posterior variance `σ²`.
pub fn lqg_scalar_objective(sigma2: f64, sigma_x2: f64, gamma: f64, a: f64, lambda: PriceParam) -> f64 {
    if sigma2 <= 0.0 {
        return f64::NEG_INFINITY;
    }
    -gamma * a * a * sigma2 - 0.5 * lambda.price() * (sigma_x2 / sigma2).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarLqgSolution {
    /// Maximizer from the first-order condition, clamped to `(0, σ_x²]`.
    pub numeric_var: f64,
    pub numeric_objective: f64,
    /// `σ_x² (1 - 1/(2λγa²σ_x²))₊`, kept for comparison.
    pub displayed_var: f64,
    pub displayed_objective: f64,
    /// `½ log(σ_x² / σ²*)` at the numeric maximizer.
    pub mutual_info: f64,
    /// `γa²σ²*` at the numeric maximizer.
    pub expected_loss: f64,
    pub formulas_agree: bool,
}

pub fn lqg_scalar_posterior_var(sigma_x2: f64, gamma: f64, a: f64, lambda: PriceParam) -> Result<ScalarLqgSolution> {
    for (name, v) in [("sigma_x2", sigma_x2), ("gamma", gamma), ("a", a)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(BpriError::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    let l = lambda.lambda();
    let gain = 2.0 * l * gamma * a * a;
    let numeric_var = (1.0 / gain).min(sigma_x2);
    let displayed_var = sigma_x2 * (1.0 - 1.0 / (gain * sigma_x2)).max(0.0);
    let numeric_objective = lqg_scalar_objective(numeric_var, sigma_x2, gamma, a, lambda);
    let displayed_objective = lqg_scalar_objective(displayed_var, sigma_x2, gamma, a, lambda);
    Ok(ScalarLqgSolution {
        numeric_var,
        numeric_objective,
        displayed_var,
        displayed_objective,
        mutual_info: 0.5 * (sigma_x2 / numeric_var).ln(),
        expected_loss: gamma * a * a * numeric_var,
        formulas_agree: (numeric_var - displayed_var).abs() <= 1e-12 * sigma_x2,
    })
}

/// Discretized reference for the scalar problem: `X ~ N(0, σ_x²)` on
/// `n_grid` points over `±width·σ_x`, reports on the same grid scaled by
/// `a`, loss `γ(ax - y)²`, solved by Blahut–Arimoto.
pub fn lqg_scalar_discretized_ba(
    sigma_x2: f64,
    gamma: f64,
    a: f64,
    lambda: PriceParam,
    n_grid: usize,
    width: f64,
) -> Result<GibbsSolution> {
    if n_grid < 2 {
        return Err(BpriError::InvalidParameter("need at least 2 grid points".into()));
    }
    let sx = sigma_x2.sqrt();
    let xs: Vec<f64> = (0..n_grid)
        .map(|i| -width * sx + 2.0 * width * sx * i as f64 / (n_grid - 1) as f64)
        .collect();
    let weights: Vec<f64> = xs.iter().map(|x| (-x * x / (2.0 * sigma_x2)).exp()).collect();
    let prior = Prior::from_weights(&weights)?;
    let loss = LossMatrix::new(
        xs.iter()
            .map(|x| xs.iter().map(|y| gamma * (a * x - a * y).powi(2)).collect())
            .collect(),
    )?;
    ba_solve(&prior, &loss, lambda, ORACLE_TOL, ORACLE_MAX_ITER)
}

// ---------------------------------------------------------------------------
// Matrix LQG
// ---------------------------------------------------------------------------

/// Gaussian state `X ~ N(μ, Σ_X)` with quadratic loss `(x-a)ᵀQ(x-a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqgProblem {
    pub sigma_x: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    #[serde(default)]
    pub mu: Vec<f64>,
}

impl LqgProblem {
    pub fn matrices(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let sx = to_matrix(&self.sigma_x, "sigma_x")?;
        let q = to_matrix(&self.q, "q")?;
        if sx.shape() != q.shape() {
            return Err(BpriError::DimensionMismatch(format!(
                "sigma_x is {:?}, q is {:?}",
                sx.shape(),
                q.shape()
            )));
        }
        if !self.mu.is_empty() && self.mu.len() != sx.nrows() {
            return Err(BpriError::DimensionMismatch("mu length differs from sigma_x".into()));
        }
        check_spd(&sx, "sigma_x")?;
        check_spd(&q, "q")?;
        Ok((sx, q))
    }
}

fn to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(BpriError::DimensionMismatch(format!("{what} must be a nonempty square matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn check_spd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(BpriError::SingularMatrix(format!("{what} is not square")));
    }
    if (m - m.transpose()).amax() > 1e-12 {
        return Err(BpriError::SingularMatrix(format!("{what} is not symmetric")));
    }
    if Cholesky::new(m.clone()).is_none() {
        return Err(BpriError::SingularMatrix(format!("{what} is not positive-definite")));
    }
    Ok(())
}

fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Cholesky::new(m.clone())
        .map(|c| c.inverse())
        .ok_or_else(|| BpriError::SingularMatrix(format!("{what} is not positive-definite")))
}

fn spd_log_det(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    let c = Cholesky::new(m.clone())
        .ok_or_else(|| BpriError::SingularMatrix(format!("{what} is not positive-definite")))?;
    Ok(2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

fn spd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()),
    ));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqgGain {
    /// `K_λ = (Σ_X⁻¹ + λQ)⁻¹ Σ_X⁻¹`.
    pub k: DMatrix<f64>,
    /// `Σ_ε = (Σ_X⁻¹ + λQ)⁻¹`.
    pub sigma_eps: DMatrix<f64>,
}

pub fn lqg_gain(sigma_x: &DMatrix<f64>, q: &DMatrix<f64>, lambda: PriceParam) -> Result<LqgGain> {
    check_spd(sigma_x, "sigma_x")?;
    check_spd(q, "q")?;
    let sx_inv = spd_inverse(sigma_x, "sigma_x")?;
    let precision = symmetrize(&sx_inv + q * lambda.lambda());
    let sigma_eps = symmetrize(spd_inverse(&precision, "posterior precision")?);
    let k = &sigma_eps * &sx_inv;
    Ok(LqgGain { k, sigma_eps })
}

/// Both closed-form mutual-information expressions, reported side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqgMutualInfo {
    /// `½ log det(I + Σ_X^{1/2} (λQ) Σ_X^{1/2})`.
    pub mi_detform: f64,
    /// `½ log(det Σ_A / det Σ_ε)` with `Σ_A = K Σ_X Kᵀ + Σ_ε`.
    pub mi_ratio: f64,
    pub discrepancy: f64,
    /// `discrepancy <= 1e-9`.
    pub consistent: bool,
}

pub fn lqg_mutual_info(sigma_x: &DMatrix<f64>, q: &DMatrix<f64>, lambda: PriceParam) -> Result<LqgMutualInfo> {
    let gain = lqg_gain(sigma_x, q, lambda)?;
    let n = sigma_x.nrows();
    let half = spd_sqrt(sigma_x);
    let inner = symmetrize(DMatrix::identity(n, n) + &half * (q * lambda.lambda()) * &half);
    let mi_detform = 0.5 * spd_log_det(&inner, "I + S^1/2 (lambda Q) S^1/2")?;
    let sigma_a = symmetrize(&gain.k * sigma_x * gain.k.transpose() + &gain.sigma_eps);
    let mi_ratio = 0.5 * (spd_log_det(&sigma_a, "sigma_a")? - spd_log_det(&gain.sigma_eps, "sigma_eps")?);
    let discrepancy = (mi_detform - mi_ratio).abs();
    if discrepancy > 1e-9 {
        log::warn!(
            "closed-form LQG mutual information expressions disagree: det form {mi_detform}, ratio form {mi_ratio}"
        );
    }
    Ok(LqgMutualInfo {
        mi_detform,
        mi_ratio,
        discrepancy,
        consistent: discrepancy <= 1e-9,
    })
}

/// `tr(Q Σ_ε)`.
pub fn lqg_expected_loss(sigma_x: &DMatrix<f64>, q: &DMatrix<f64>, lambda: PriceParam) -> Result<f64> {
    let gain = lqg_gain(sigma_x, q, lambda)?;
    Ok((q * &gain.sigma_eps).trace())
}

/// `max |K + λ Σ_ε Q - I|`, zero when `K` and `Σ_ε` share the posterior precision.
pub fn lqg_gain_identity_residual(gain: &LqgGain, q: &DMatrix<f64>, lambda: PriceParam) -> f64 {
    let n = q.nrows();
    (&gain.k + &gain.sigma_eps * q * lambda.lambda() - DMatrix::identity(n, n)).amax()
}

/// Smallest eigenvalue of `Σ_X - Σ_ε`; positive when the posterior is
/// strictly tighter than the prior.
pub fn lqg_posterior_gap(gain: &LqgGain, sigma_x: &DMatrix<f64>) -> f64 {
    let diff = symmetrize(sigma_x - &gain.sigma_eps);
    SymmetricEigen::new(diff).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `max |K Σ_X - (K Σ_X)ᵀ|`.
pub fn lqg_symmetry_residual(gain: &LqgGain, sigma_x: &DMatrix<f64>) -> f64 {
    let ks = &gain.k * sigma_x;
    (&ks - ks.transpose()).amax()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiForm {
    DetForm,
    Ratio,
}

/// Closed forms for a scalar problem `σ_x², q, λ` next to a discretized
/// Blahut–Arimoto run on the same problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqgArbitration {
    pub lambda: f64,
    pub gain: f64,
    pub sigma_eps: f64,
    pub mi_detform: f64,
    pub mi_ratio: f64,
    pub loss_closed_form: f64,
    pub oracle_mi: f64,
    pub oracle_loss: f64,
    pub oracle_iterations: usize,
    pub detform_rel_err: f64,
    pub ratio_rel_err: f64,
    pub loss_rel_err: f64,
    /// The closed-form MI expression nearer the oracle.
    pub closer_form: MiForm,
    /// `K` evaluated at `λ = 1e-12`; the formula gives 1 here, not 0.
    pub gain_near_zero_price: f64,
}

pub fn lqg_arbitrate_scalar(sigma_x2: f64, q: f64, lambda: PriceParam, n_grid: usize) -> Result<LqgArbitration> {
    let sx = DMatrix::from_element(1, 1, sigma_x2);
    let qm = DMatrix::from_element(1, 1, q);
    let gain = lqg_gain(&sx, &qm, lambda)?;
    let mi = lqg_mutual_info(&sx, &qm, lambda)?;
    let loss_closed_form = lqg_expected_loss(&sx, &qm, lambda)?;
    let oracle = lqg_scalar_discretized_ba(sigma_x2, q, 1.0, lambda, n_grid, 4.0)?;
    let near_zero = lqg_gain(&sx, &qm, PriceParam::new(1e-12)?)?;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    let detform_rel_err = rel(mi.mi_detform, oracle.mutual_info);
    let ratio_rel_err = rel(mi.mi_ratio, oracle.mutual_info);
    Ok(LqgArbitration {
        lambda: lambda.lambda(),
        gain: gain.k[(0, 0)],
        sigma_eps: gain.sigma_eps[(0, 0)],
        mi_detform: mi.mi_detform,
        mi_ratio: mi.mi_ratio,
        loss_closed_form,
        oracle_mi: oracle.mutual_info,
        oracle_loss: oracle.expected_loss,
        oracle_iterations: oracle.iterations,
        detform_rel_err,
        ratio_rel_err,
        loss_rel_err: rel(loss_closed_form, oracle.expected_loss),
        closer_form: if detform_rel_err <= ratio_rel_err { MiForm::DetForm } else { MiForm::Ratio },
        gain_near_zero_price: near_zero.k[(0, 0)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lam(v: f64) -> PriceParam {
        PriceParam::new(v).unwrap()
    }

    #[test]
    fn shrinkage_factor_examples() {
        assert_eq!(stein_shrinkage_factor(lam(1.0), 0.5).unwrap(), 0.5);
        assert!(stein_shrinkage_factor(lam(1e12), 0.5).unwrap() > 1.0 - 1e-11);
        assert_eq!(stein_shrinkage_factor(lam(0.5), 1.0).unwrap(), 0.5);
        assert!(stein_shrinkage_factor(lam(1.0), 0.0).is_err());
        let s: Vec<f64> = [0.01, 0.1, 1.0, 10.0]
            .iter()
            .map(|&l| stein_shrinkage_factor(lam(l), 2.0).unwrap())
            .collect();
        assert!(s.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn risk_examples() {
        let theta = [0.3, -1.2, 2.0, 0.0];
        let r = stein_risk(lam(1e12), &theta, 0.5).unwrap();
        assert!((r - 4.0).abs() < 1e-10);
        let r = stein_risk(lam(1.0), &[0.0; 6], 0.5).unwrap();
        assert!((r - 0.25 * 6.0).abs() < 1e-15);
        let (b, v) = stein_risk_terms(lam(0.3), &theta, 1.0).unwrap();
        assert!(b >= 0.0 && v >= 0.0);
    }

    #[test]
    fn lambda_star_examples() {
        let grid = default_lambda_grid();
        let (l, _) = stein_lambda_star(&[0.0; 5], 0.5, &grid).unwrap();
        assert_eq!(l, grid[0]);
        // interior optimum at λ* = ‖θ‖² / (2τ² p)
        let theta = [1.0, 0.5, 0.25, 0.0, 0.0];
        let (l, r) = stein_lambda_star(&theta, 0.5, &grid).unwrap();
        let exact = 1.3125 / 5.0;
        assert!((l - exact).abs() / exact < 1e-5, "{l}");
        assert!(r < 5.0);
    }

    #[test]
    fn js_requires_three_dims() {
        assert!(matches!(
            js_positive_part_risk_mc(&[0.0, 0.0], 10, 1),
            Err(BpriError::DimensionTooSmall(2))
        ));
    }

    #[test]
    fn scalar_lqg_corner_and_interior() {
        // 2λγa²σ_x² = 0.5 <= 1: no attention
        let s = lqg_scalar_posterior_var(1.0, 1.0, 0.5, lam(1.0)).unwrap();
        assert_eq!(s.numeric_var, 1.0);
        assert_eq!(s.mutual_info, 0.0);
        // 2λγa²σ_x² = 2: interior at σ_x²/2
        let s = lqg_scalar_posterior_var(2.0, 1.0, 1.0, lam(0.5)).unwrap();
        assert!((s.numeric_var - 1.0).abs() < 1e-15);
        assert!(s.numeric_objective >= s.displayed_objective);
        let s = lqg_scalar_posterior_var(1.0, 1.0, 1.0, lam(1e9)).unwrap();
        assert!(s.numeric_var < 1e-9);
    }

    #[test]
    fn gain_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let g = lqg_gain(&i2, &i2, lam(1.0)).unwrap();
        assert!((&g.k - &i2 * 0.5).amax() < 1e-15);
        assert!((&g.sigma_eps - &i2 * 0.5).amax() < 1e-15);
        let g = lqg_gain(&i2, &i2, lam(1e12)).unwrap();
        assert!(g.sigma_eps.norm() < 1e-10);
        // the formula gives K -> I as λ -> 0
        let g = lqg_gain(&i2, &i2, lam(1e-12)).unwrap();
        assert!((&g.k - &i2).amax() < 1e-11);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(lqg_gain(&bad, &i2, lam(1.0)), Err(BpriError::SingularMatrix(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(lqg_gain(&asym, &i2, lam(1.0)).is_err());
    }

    #[test]
    fn mutual_info_forms() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let mi = lqg_mutual_info(&one, &one, lam(1.0)).unwrap();
        assert!((mi.mi_detform - 0.5 * 2f64.ln()).abs() < 1e-15);
        // K = Σ_ε = 1/2, Σ_A = 1/4 + 1/2
        assert!((mi.mi_ratio - 0.5 * 1.5f64.ln()).abs() < 1e-15);
        assert!(!mi.consistent);
        let mi = lqg_mutual_info(&one, &one, lam(1e-12)).unwrap();
        assert!(mi.mi_detform < 1e-12);
    }

    #[test]
    fn expected_loss_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert!((lqg_expected_loss(&i2, &i2, lam(1.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!(lqg_expected_loss(&i2, &i2, lam(1e12)).unwrap() < 1e-10);
        let sx = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 3.0]);
        let limit = (&q * &sx).trace();
        assert!((lqg_expected_loss(&sx, &q, lam(1e-12)).unwrap() - limit).abs() < 1e-9);
        let a = lqg_expected_loss(&sx, &q, lam(0.5)).unwrap();
        let b = lqg_expected_loss(&sx, &q, lam(2.0)).unwrap();
        assert!(a > b && b > 0.0);
    }

    #[test]
    fn discretized_oracle_matches_numeric_optimum() {
        for &(sx2, g, a, l) in &[(1.0, 1.0, 1.0, 1.0), (1.0, 1.0, 1.0, 4.0), (2.0, 0.5, 1.5, 1.0)] {
            let num = lqg_scalar_posterior_var(sx2, g, a, lam(l)).unwrap();
            let ba = lqg_scalar_discretized_ba(sx2, g, a, lam(l), 41, 4.0).unwrap();
            assert!((ba.mutual_info - num.mutual_info).abs() / num.mutual_info < 0.02);
            assert!((ba.expected_loss - num.expected_loss).abs() / num.expected_loss < 0.02);
        }
    }

    #[test]
    fn arbitration_reports_both_forms() {
        let r = lqg_arbitrate_scalar(1.0, 1.0, lam(2.0), 41).unwrap();
        assert!((r.mi_detform - 0.5 * 3f64.ln()).abs() < 1e-14);
        assert!((r.gain_near_zero_price - 1.0).abs() < 1e-11);
        // the oracle sits at ½ log(2λqσ²) = ½ log 4
        assert!((r.oracle_mi - 0.5 * 4f64.ln()).abs() / r.oracle_mi < 0.02);
        assert!(r.detform_rel_err > 0.1 && r.ratio_rel_err > 0.1);
    }

    #[test]
    fn golden_section_finds_quadratic_minimum() {
        let (x, fx) = golden_section(0.0, 4.0, 1e-9, |x| Ok((x - 1.3).powi(2))).unwrap();
        assert!((x - 1.3).abs() < 1e-8);
        assert!(fx < 1e-15);
    }
}
