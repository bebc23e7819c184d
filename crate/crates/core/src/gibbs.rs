//! Gibbs–Boltzmann channel update and the identities built on it.
//!
//! The internal form is loss minimization: a channel `f` is scored by
//! `J(f) = E[ℓ(X,Y)] + λ⁻¹ I(X;Y)`. Callers working with utilities build the
//! loss with [`LossMatrix::from_utility`] and read `-J` as the utility value.

use serde::{Deserialize, Serialize};

use crate::error::{BpriError, Result};
use crate::prob::{mutual_information, Channel, LossMatrix, Marginal, Prior};

/// Entries whose tilt sits more than this many nats below the row optimum
/// are not representable in `f64` after exponentiation and are set to zero.
pub const EXP_UNDERFLOW: f64 = 745.0;

/// Inverse information price `λ > 0`. The penalty on mutual information is `λ⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PriceParam(f64);

impl PriceParam {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda.is_finite() && lambda > 0.0 {
            Ok(Self(lambda))
        } else {
            Err(BpriError::InvalidParameter(format!(
                "lambda must be positive and finite, got {lambda}"
            )))
        }
    }

    /// From the information price `λ⁻¹`.
    pub fn from_price(price: f64) -> Result<Self> {
        if price.is_finite() && price > 0.0 {
            Self::new(1.0 / price)
        } else {
            Err(BpriError::InvalidParameter(format!(
                "price must be positive and finite, got {price}"
            )))
        }
    }

    pub fn lambda(self) -> f64 {
        self.0
    }

    pub fn price(self) -> f64 {
        1.0 / self.0
    }
}

impl TryFrom<f64> for PriceParam {
    type Error = BpriError;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PriceParam> for f64 {
    fn from(p: PriceParam) -> f64 {
        p.0
    }
}

/// Per-state `log Z_λ(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogPartition(pub Vec<f64>);

impl LogPartition {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// One Gibbs row `f(y) ∝ q(y) exp(-λ ℓ(y))`, written into `out`.
/// Returns `log Σ_y q(y) exp(-λ ℓ(y))`.
pub(crate) fn gibbs_row(loss_row: &[f64], log_q: &[f64], lambda: f64, out: &mut [f64]) -> f64 {
    let min_tilt = loss_row
        .iter()
        .zip(log_q)
        .filter(|(_, &lq)| lq > f64::NEG_INFINITY)
        .map(|(&l, _)| lambda * l)
        .fold(f64::INFINITY, f64::min);
    let mut max_log = f64::NEG_INFINITY;
    for ((o, &l), &lq) in out.iter_mut().zip(loss_row).zip(log_q) {
        let tilt = lambda * l;
        *o = if lq > f64::NEG_INFINITY && tilt - min_tilt <= EXP_UNDERFLOW {
            lq - tilt
        } else {
            f64::NEG_INFINITY
        };
        max_log = max_log.max(*o);
    }
    let mut sum = 0.0;
    for o in out.iter_mut() {
        *o = if *o == f64::NEG_INFINITY { 0.0 } else { (*o - max_log).exp() };
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
    max_log + sum.ln()
}

/// Elementwise `ln q`, with `-∞` on zero entries.
pub(crate) fn log_weights(q: &[f64]) -> Vec<f64> {
    q.iter().map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect()
}

/// Gibbs channel `f(y|x) = q(y) exp(-λ ℓ(x,y)) / Z(x)` for every state, with
/// the per-state log-partition.
pub fn gibbs_update(
    loss: &LossMatrix,
    q: &Marginal,
    lambda: PriceParam,
) -> Result<(Channel, LogPartition)> {
    if loss.n_y() != q.len() {
        return Err(BpriError::DimensionMismatch(format!(
            "loss has {} reports, marginal has {}",
            loss.n_y(),
            q.len()
        )));
    }
    if !q.as_slice().iter().any(|&v| v > 0.0) {
        return Err(BpriError::EmptySupport);
    }
    let (n_x, n_y) = (loss.n_x(), loss.n_y());
    let mut data = vec![0.0; n_x * n_y];
    let mut log_z = Vec::with_capacity(n_x);
    let log_q = log_weights(q.as_slice());
    for (x, row) in data.chunks_mut(n_y).enumerate() {
        log_z.push(gibbs_row(loss.row(x), &log_q, lambda.lambda(), row));
    }
    Ok((Channel::from_raw(n_x, n_y, data), LogPartition(log_z)))
}

/// Expected loss `E[ℓ(X,Y)]` under `p(x) f(y|x)`.
pub fn expected_loss(prior: &Prior, loss: &LossMatrix, f: &Channel) -> Result<f64> {
    check_dims(prior, loss, f)?;
    Ok((0..prior.len())
        .filter(|&x| prior[x] > 0.0)
        .map(|x| {
            prior[x]
                * f.row(x)
                    .iter()
                    .zip(loss.row(x))
                    .map(|(fy, l)| fy * l)
                    .sum::<f64>()
        })
        .sum())
}

fn check_dims(prior: &Prior, loss: &LossMatrix, f: &Channel) -> Result<()> {
    loss.check_dims(prior.len(), Some(f.n_y()))?;
    if f.n_x() != prior.len() {
        return Err(BpriError::DimensionMismatch(format!(
            "channel has {} states, prior has {}",
            f.n_x(),
            prior.len()
        )));
    }
    Ok(())
}

/// `J_λ(f) = E[ℓ] + λ⁻¹ I(X;Y)`.
pub fn objective(prior: &Prior, loss: &LossMatrix, f: &Channel, lambda: PriceParam) -> Result<f64> {
    let el = expected_loss(prior, loss, f)?;
    Ok(el + lambda.price() * mutual_information(prior, f)?)
}

/// Optimal value `-λ⁻¹ E_p[log Z_λ(X)]` in loss form. In utility form
/// (`U = -ℓ`) the value is the negation, `+λ⁻¹ E[log Z]` with `Z` built from
/// `exp(λU)`.
pub fn optimal_value(prior: &Prior, log_z: &LogPartition, lambda: PriceParam) -> Result<f64> {
    if log_z.0.len() != prior.len() {
        return Err(BpriError::DimensionMismatch(format!(
            "log-partition has {} states, prior has {}",
            log_z.0.len(),
            prior.len()
        )));
    }
    let e: f64 = prior
        .as_slice()
        .iter()
        .zip(&log_z.0)
        .filter(|(&p, _)| p > 0.0)
        .map(|(p, z)| p * z)
        .sum();
    Ok(-lambda.price() * e)
}

/// Entropic tilt `π(x) ∝ p(x) exp(λ⁻¹ log Z_λ(x))`.
pub fn entropic_tilt(prior: &Prior, log_z: &LogPartition, lambda: PriceParam) -> Result<Prior> {
    if log_z.0.len() != prior.len() {
        return Err(BpriError::DimensionMismatch(format!(
            "log-partition has {} states, prior has {}",
            log_z.0.len(),
            prior.len()
        )));
    }
    if log_z.0.iter().any(|z| !z.is_finite()) {
        return Err(BpriError::InvalidParameter("log-partition is not finite".into()));
    }
    let logs: Vec<f64> = prior
        .as_slice()
        .iter()
        .zip(&log_z.0)
        .map(|(&p, &z)| if p > 0.0 { p.ln() + lambda.price() * z } else { f64::NEG_INFINITY })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    Prior::from_weights(&weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::kl;

    fn lam(v: f64) -> PriceParam {
        PriceParam::new(v).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn price_param_validation() {
        assert!(PriceParam::new(0.0).is_err());
        assert!(PriceParam::new(f64::INFINITY).is_err());
        close(PriceParam::from_price(0.25).unwrap().lambda(), 4.0, 0.0);
    }

    #[test]
    fn vanishing_lambda_returns_marginal() {
        let loss = LossMatrix::new(vec![vec![0.0, 3.0, 1.0], vec![2.0, 0.5, 0.0]]).unwrap();
        let q = Marginal::new(vec![0.2, 0.5, 0.3]).unwrap();
        let (f, _) = gibbs_update(&loss, &q, lam(1e-12)).unwrap();
        for row in f.rows() {
            for (a, b) in row.iter().zip(q.as_slice()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_loss_returns_marginal_exactly() {
        let loss = LossMatrix::new(vec![vec![2.5; 3]; 2]).unwrap();
        let q = Marginal::new(vec![0.2, 0.5, 0.3]).unwrap();
        let (f, log_z) = gibbs_update(&loss, &q, lam(3.0)).unwrap();
        for row in f.rows() {
            for (a, b) in row.iter().zip(q.as_slice()) {
                close(*a, *b, 1e-15);
            }
        }
        let prior = Prior::uniform(2).unwrap();
        close(optimal_value(&prior, &log_z, lam(3.0)).unwrap(), 2.5, 1e-14);
    }

    #[test]
    fn two_by_two_softmax() {
        let loss = LossMatrix::hamming(2);
        let q = Marginal::uniform(2).unwrap();
        let (f, log_z) = gibbs_update(&loss, &q, lam(1.0)).unwrap();
        // oracle: direct softmax
        let e = (-1f64).exp();
        close(f.get(0, 0), 1.0 / (1.0 + e), 1e-15);
        close(f.get(0, 1), e / (1.0 + e), 1e-15);
        close(f.get(0, 0), 0.731059, 1e-6);
        close(log_z.0[0], (0.5 * (1.0 + e)).ln(), 1e-15);
    }

    #[test]
    fn zero_marginal_entries_stay_zero() {
        let loss = LossMatrix::new(vec![vec![5.0, 0.0, 1.0]]).unwrap();
        let q = Marginal::new(vec![0.5, 0.0, 0.5]).unwrap();
        let (f, _) = gibbs_update(&loss, &q, lam(2.0)).unwrap();
        assert_eq!(f.get(0, 1), 0.0);
        assert!(f.get(0, 0) > 0.0);
    }

    #[test]
    fn empty_support_is_rejected() {
        let loss = LossMatrix::hamming(2);
        let q = Marginal::from_raw(vec![0.0, 0.0]);
        assert!(matches!(gibbs_update(&loss, &q, lam(1.0)), Err(BpriError::EmptySupport)));
    }

    #[test]
    fn large_tilts_underflow_to_zero() {
        let loss = LossMatrix::new(vec![vec![0.0, 1.0]]).unwrap();
        let q = Marginal::uniform(2).unwrap();
        let (f, log_z) = gibbs_update(&loss, &q, lam(1e4)).unwrap();
        assert_eq!(f.row(0), &[1.0, 0.0]);
        close(log_z.0[0], 0.5f64.ln(), 1e-15);
    }

    #[test]
    fn objective_examples() {
        let prior = Prior::new(vec![0.3, 0.7]).unwrap();
        let loss = LossMatrix::new(vec![vec![1.0, 2.0], vec![4.0, 0.0]]).unwrap();
        let r = Marginal::new(vec![0.25, 0.75]).unwrap();
        let j = objective(&prior, &loss, &Channel::constant(2, &r), lam(2.0)).unwrap();
        let direct = 0.3 * (0.25 * 1.0 + 0.75 * 2.0) + 0.7 * (0.25 * 4.0);
        close(j, direct, 1e-15);

        let k = 4;
        let prior = Prior::uniform(k).unwrap();
        let j = objective(&prior, &LossMatrix::hamming(k), &Channel::identity(k).unwrap(), lam(2.0))
            .unwrap();
        close(j, 0.5 * (k as f64).ln(), 1e-14);
    }

    #[test]
    fn tilt_examples() {
        let prior = Prior::new(vec![0.1, 0.6, 0.3]).unwrap();
        let t = entropic_tilt(&prior, &LogPartition(vec![-0.7; 3]), lam(2.0)).unwrap();
        for (a, b) in t.as_slice().iter().zip(prior.as_slice()) {
            close(*a, *b, 1e-15);
        }
        let l = lam(1.7);
        let prior = Prior::uniform(2).unwrap();
        let t = entropic_tilt(&prior, &LogPartition(vec![0.0, l.lambda() * 2f64.ln()]), l).unwrap();
        close(t[0], 1.0 / 3.0, 1e-15);
        close(t[1], 2.0 / 3.0, 1e-15);
    }

    #[test]
    fn gibbs_row_minimizes_free_energy() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let l = lam(1.3);
        for _ in 0..10 {
            let loss_row: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..2.0)).collect();
            let q: Vec<f64> = (0..5).map(|_| rng.random_range(0.05..1.0)).collect();
            let q = Marginal::from_weights(&q).unwrap();
            let loss = LossMatrix::new(vec![loss_row.clone()]).unwrap();
            let (f, _) = gibbs_update(&loss, &q, l).unwrap();
            let score = |row: &[f64]| -> f64 {
                row.iter().zip(&loss_row).map(|(a, b)| a * b).sum::<f64>()
                    + l.price() * kl(row, q.as_slice()).unwrap()
            };
            let best = score(f.row(0));
            for _ in 0..100 {
                let cand: Vec<f64> = f
                    .row(0)
                    .iter()
                    .map(|v| (v * (1.0 + rng.random_range(-0.5..0.5))).max(1e-12))
                    .collect();
                let s: f64 = cand.iter().sum();
                let cand: Vec<f64> = cand.iter().map(|v| v / s).collect();
                assert!(score(&cand) >= best - 1e-12);
            }
        }
    }
}
