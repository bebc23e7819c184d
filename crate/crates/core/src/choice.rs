//! Multinomial-logit specialization.
//!
//! With loss `-u_k` on `K` alternatives and no state uncertainty, the Gibbs
//! channel is the softmax `p_k ∝ exp(λ u_k)`. The curvature diagnostic is
//! `H = λ Var_p(u)`, which is `λ` times the second derivative of the
//! log-partition `log Σ exp(λ u_j)` in `λ`.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ba::{ba_solve, support_set, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::error::{BpriError, Result};
use crate::gibbs::PriceParam;
use crate::prob::{log_sum_exp, LossMatrix, Prior};
use crate::rng::substream;

/// `z = 1.96`, two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

pub fn softmax_channel(u: &[f64], lambda: PriceParam) -> Vec<f64> {
    let l = lambda.lambda();
    let scaled: Vec<f64> = u.iter().map(|v| l * v).collect();
    let lse = log_sum_exp(&scaled);
    let mut p: Vec<f64> = scaled.iter().map(|s| (s - lse).exp()).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

fn variance_under(p: &[f64], u: &[f64]) -> f64 {
    let mean: f64 = p.iter().zip(u).map(|(a, b)| a * b).sum();
    p.iter().zip(u).map(|(a, b)| a * (b - mean) * (b - mean)).sum()
}

/// `H = λ Var_p(u)` with `p = softmax(λ u)`.
pub fn curvature(u: &[f64], lambda: PriceParam) -> f64 {
    let p = softmax_channel(u, lambda);
    lambda.lambda() * variance_under(&p, u)
}

/// Curvature of the symmetric family `u = (θ, 0, -θ)` from the closed form
/// `Var = θ²(p₁ + p₃) - θ²(p₁ - p₃)²`.
pub fn tri_choice_curvature(theta: f64, lambda: PriceParam) -> f64 {
    let p = softmax_channel(&[theta, 0.0, -theta], lambda);
    let t2 = theta * theta;
    let var = t2 * (p[0] + p[2]) - t2 * (p[0] - p[2]) * (p[0] - p[2]);
    lambda.lambda() * var
}

/// `Σ_k (dp_k/dθ)² / p_k` for the symmetric tri-choice family.
pub fn mnl_fisher_info(theta: f64, lambda: PriceParam) -> f64 {
    let p = softmax_channel(&[theta, 0.0, -theta], lambda);
    let du = [1.0, 0.0, -1.0];
    let mean_du = p[0] - p[2];
    let l = lambda.lambda();
    p.iter()
        .zip(du)
        .filter(|(&pk, _)| pk > 0.0)
        .map(|(&pk, d)| {
            let dp = l * pk * (d - mean_du);
            dp * dp / pk
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureTableRow {
    pub lambda: f64,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl CurvatureTableRow {
    fn from_samples(lambda: f64, samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|h| (h - mean) * (h - mean)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        let se = sd / n.sqrt();
        Self {
            lambda,
            mean,
            sd,
            se,
            ci_low: mean - Z_95 * se,
            ci_high: mean + Z_95 * se,
        }
    }
}

/// Monte Carlo mean curvature over `u ~ N(0, I_K)`.
///
/// Draw `b` comes from substream `b` of `seed`, and the same `B` draws are
/// reused at every `λ`.
pub fn mc_curvature(k: usize, lambda_grid: &[f64], draws: usize, seed: u64) -> Result<Vec<CurvatureTableRow>> {
    if k < 2 || draws < 2 {
        return Err(BpriError::InvalidParameter(format!(
            "need K >= 2 and B >= 2 (got K={k}, B={draws})"
        )));
    }
    let lambdas = lambda_grid
        .iter()
        .map(|&l| PriceParam::new(l))
        .collect::<Result<Vec<_>>>()?;
    let utilities: Vec<Vec<f64>> = (0..draws as u64)
        .map(|b| {
            let mut rng = substream(seed, b);
            (0..k).map(|_| StandardNormal.sample(&mut rng)).collect()
        })
        .collect();
    Ok(lambdas
        .iter()
        .map(|&l| {
            let h: Vec<f64> = utilities.iter().map(|u| curvature(u, l)).collect();
            CurvatureTableRow::from_samples(l.lambda(), &h)
        })
        .collect())
}

/// CSV with columns `lambda, mean, sd, se, ci_low, ci_high`.
pub fn write_curvature_csv<W: Write>(rows: &[CurvatureTableRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda", "mean", "sd", "se", "ci_low", "ci_high"])?;
    for r in rows {
        w.write_record(
            [r.lambda, r.mean, r.sd, r.se, r.ci_low, r.ci_high].map(|v| format!("{v:.16e}")),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Coarse description of a consideration set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceRegime {
    /// Every alternative keeps positive marginal mass.
    FullSupport,
    /// Some alternatives are screened out; choice is compensatory within the rest.
    Sparse,
    /// Every state picks one alternative with probability above 0.99.
    NearDeterministic,
}

/// Row-maximum threshold for the near-deterministic regime.
pub const DETERMINISTIC_THRESHOLD: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsiderationPoint {
    pub lambda: f64,
    pub support: Vec<usize>,
    pub regime: ChoiceRegime,
    pub mutual_info: f64,
    /// Smallest over states of the largest channel entry.
    pub min_row_max: f64,
}

/// Support of the optimal marginal along an increasing `λ` grid. `loss` is
/// the negated utility (see [`LossMatrix::from_utility`]).
pub fn consideration_sweep(
    prior: &Prior,
    loss: &LossMatrix,
    lambda_grid: &[f64],
    eps: f64,
) -> Result<Vec<ConsiderationPoint>> {
    if lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BpriError::InvalidParameter("lambda grid must be increasing".into()));
    }
    let mut out = Vec::with_capacity(lambda_grid.len());
    for &l in lambda_grid {
        let sol = ba_solve(prior, loss, PriceParam::new(l)?, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        let support = support_set(&sol.marginal, eps);
        let min_row_max = (0..prior.len())
            .filter(|&x| prior[x] > 0.0)
            .map(|x| sol.channel.row(x).iter().copied().fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min);
        let regime = if min_row_max > DETERMINISTIC_THRESHOLD {
            ChoiceRegime::NearDeterministic
        } else if support.len() == loss.n_y() {
            ChoiceRegime::FullSupport
        } else {
            ChoiceRegime::Sparse
        };
        out.push(ConsiderationPoint {
            lambda: l,
            support,
            regime,
            mutual_info: sol.mutual_info,
            min_row_max,
        });
    }
    Ok(out)
}

/// Largest grid `λ` at or below which `option` is outside every recorded
/// support, or `None` if it is in the support at the smallest `λ`.
pub fn exclusion_threshold(sweep: &[ConsiderationPoint], option: usize) -> Option<f64> {
    let mut threshold = None;
    for p in sweep {
        if p.support.contains(&option) {
            break;
        }
        threshold = Some(p.lambda);
    }
    threshold
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lam(v: f64) -> PriceParam {
        PriceParam::new(v).unwrap()
    }

    #[test]
    fn softmax_examples() {
        let p = softmax_channel(&[3.0, -1.0, 0.5, 2.0], lam(1e-12));
        assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-9));
        let p = softmax_channel(&[0.0, 0.0, -0.0], lam(2.0));
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let p = softmax_channel(&[1.0, 0.0], lam(1.0));
        assert!((p[0] - 1.0 / (1.0 + (-1f64).exp())).abs() < 1e-15);
        assert!((p[0] - 0.731059).abs() < 1e-6);
        let p = softmax_channel(&[800.0, 0.0], lam(1.0));
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn curvature_examples() {
        assert_eq!(curvature(&[0.3; 4], lam(2.0)), 0.0);
        assert_eq!(tri_choice_curvature(0.0, lam(1.0)), 0.0);
        assert!(tri_choice_curvature(50.0, lam(1.0)) < 1e-6);
        let a = tri_choice_curvature(1.0, lam(1.0));
        let b = curvature(&[1.0, 0.0, -1.0], lam(1.0));
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn fisher_examples() {
        assert!(mnl_fisher_info(0.7, lam(1e-12)) < 1e-20);
        assert!(mnl_fisher_info(50.0, lam(1.0)) < 1e-6);
        assert!(mnl_fisher_info(-50.0, lam(1.0)) < 1e-6);
    }

    #[test]
    fn mc_rejects_small_inputs() {
        assert!(mc_curvature(1, &[1.0], 10, 1).is_err());
        assert!(mc_curvature(3, &[1.0], 1, 1).is_err());
        assert!(mc_curvature(3, &[0.0], 10, 1).is_err());
    }

    #[test]
    fn mc_row_statistics_are_consistent() {
        let rows = mc_curvature(4, &[0.5, 1.0], 200, 3).unwrap();
        for r in &rows {
            assert!((r.se - r.sd / 200f64.sqrt()).abs() < 1e-15);
            assert!((r.ci_low - (r.mean - 1.96 * r.se)).abs() < 1e-15);
            assert!((r.ci_high - (r.mean + 1.96 * r.se)).abs() < 1e-15);
        }
        assert_eq!(rows, mc_curvature(4, &[0.5, 1.0], 200, 3).unwrap());
    }

    #[test]
    fn exclusion_threshold_reads_prefix() {
        let pt = |l: f64, s: Vec<usize>| ConsiderationPoint {
            lambda: l,
            support: s,
            regime: ChoiceRegime::Sparse,
            mutual_info: 0.0,
            min_row_max: 0.5,
        };
        let sweep = vec![pt(0.1, vec![0]), pt(0.5, vec![0, 1]), pt(1.0, vec![0, 1, 2])];
        assert_eq!(exclusion_threshold(&sweep, 2), Some(0.5));
        assert_eq!(exclusion_threshold(&sweep, 1), Some(0.1));
        assert_eq!(exclusion_threshold(&sweep, 0), None);
    }
}
