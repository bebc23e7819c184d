//! Stochastic Blahut–Arimoto.
//!
//! Each step samples a state `X_t ~ p`, forms the Gibbs row of the current
//! marginal against a (possibly noisy) loss row, and moves the marginal a
//! Robbins–Monro step toward it:
//!
//! ```text
//! q_{t+1} = (1 - η_t) q_t + η_t f_{q_t}(· | X_t)
//! ```
//!
//! Every iterate is a convex combination of simplex points, so it stays on
//! the simplex.

use std::io::Write;

use log::{debug, warn};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::ba::{ba_operator, ba_solve};
use crate::error::{BpriError, Result};
use crate::gibbs::{gibbs_row, gibbs_update, log_weights, PriceParam};
use crate::prob::{Channel, LossMatrix, Marginal, Prior};
use crate::rng::substream;

/// Entries of the marginal below this are flushed to zero.
pub const CLAMP_FLOOR: f64 = 1e-300;

/// Tolerance used for the deterministic reference fixed point.
pub const REFERENCE_TOL: f64 = 1e-12;

const STATE_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

/// `η_t = a / (t + b + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub a: f64,
    pub b: f64,
}

impl StepSchedule {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || !(b >= 0.0 && b.is_finite()) {
            return Err(BpriError::InvalidParameter(format!(
                "step schedule needs a > 0 and b >= 0 (got a={a}, b={b})"
            )));
        }
        if a / (b + 1.0) > 1.0 {
            return Err(BpriError::InvalidParameter(format!(
                "first step a/(b+1) = {} exceeds 1",
                a / (b + 1.0)
            )));
        }
        Ok(Self { a, b })
    }

    pub fn eta(&self, t: usize) -> f64 {
        self.a / (t as f64 + self.b + 1.0)
    }
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self { a: 1.0, b: 10.0 }
    }
}

/// Additive zero-mean noise on each loss entry of the sampled row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    None,
    Gaussian { sigma: f64 },
}

#[derive(Debug, Clone)]
pub struct SbaConfig {
    pub schedule: StepSchedule,
    pub noise: NoiseModel,
    pub seed: u64,
    pub steps: usize,
    pub log_stride: usize,
    /// Gibbs rows averaged per step; 1 reproduces the single-sample update.
    pub batch: usize,
    /// Fixed point to measure `KL(q* || q_t)` against.
    pub reference: Option<Marginal>,
}

impl SbaConfig {
    pub fn new(steps: usize, seed: u64) -> Self {
        Self {
            schedule: StepSchedule::default(),
            noise: NoiseModel::None,
            seed,
            steps,
            log_stride: 1,
            batch: 1,
            reference: None,
        }
    }
}

/// One logged step. `marginal` is the iterate after the update at step `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbaRecord {
    pub t: usize,
    pub eta: f64,
    pub sampled_state: usize,
    pub kl_to_ref: Option<f64>,
    pub marginal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbaTrajectory {
    pub records: Vec<SbaRecord>,
    pub final_marginal: Marginal,
    /// Gibbs channel of the final marginal under the noiseless loss.
    pub final_channel: Channel,
    /// Number of times the floor clamp fired.
    pub clamp_events: usize,
}

impl SbaTrajectory {
    /// `(t, KL(q* || q_t))` pairs, present when a reference was supplied.
    pub fn kl_series(&self) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter_map(|r| r.kl_to_ref.map(|k| (r.t, k)))
            .collect()
    }

    /// CSV with columns `t, eta_t, kl_to_ref, sampled_state`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "eta_t", "kl_to_ref", "sampled_state"])?;
        for r in &self.records {
            w.write_record([
                r.t.to_string(),
                format!("{:.16e}", r.eta),
                r.kl_to_ref.map_or(String::new(), |k| format!("{k:.16e}")),
                r.sampled_state.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `KL(p || q)` with `+inf` on support violations; no simplex validation.
fn kl_unchecked(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| if b > 0.0 { a * (a / b).ln() } else { f64::INFINITY })
        .sum::<f64>()
        .max(0.0)
}

/// Deterministic fixed point used as the convergence target.
pub fn reference_marginal(prior: &Prior, loss: &LossMatrix, lambda: PriceParam) -> Result<Marginal> {
    Ok(ba_solve(prior, loss, lambda, REFERENCE_TOL, 1_000_000)?.marginal)
}

#[allow(clippy::too_many_arguments)]
pub fn sba_run(
    prior: &Prior,
    loss: &LossMatrix,
    lambda: PriceParam,
    schedule: StepSchedule,
    noise: NoiseModel,
    seed: u64,
    steps: usize,
    log_stride: usize,
) -> Result<SbaTrajectory> {
    let cfg = SbaConfig {
        schedule,
        noise,
        seed,
        steps,
        log_stride,
        batch: 1,
        reference: None,
    };
    sba_run_with(prior, loss, lambda, &cfg)
}

pub fn sba_run_with(
    prior: &Prior,
    loss: &LossMatrix,
    lambda: PriceParam,
    cfg: &SbaConfig,
) -> Result<SbaTrajectory> {
    loss.check_dims(prior.len(), None)?;
    if cfg.steps == 0 || cfg.log_stride == 0 || cfg.batch == 0 {
        return Err(BpriError::InvalidParameter(
            "steps, log_stride and batch must all be at least 1".into(),
        ));
    }
    let n_y = loss.n_y();
    if let Some(r) = &cfg.reference {
        if r.len() != n_y {
            return Err(BpriError::DimensionMismatch(format!(
                "reference has {} entries, loss has {n_y} reports",
                r.len()
            )));
        }
    }
    let noise = match cfg.noise {
        NoiseModel::None => None,
        NoiseModel::Gaussian { sigma } => Some(Normal::new(0.0, sigma).map_err(|e| {
            BpriError::InvalidParameter(format!("gaussian noise sigma={sigma}: {e}"))
        })?),
    };
    let states = WeightedIndex::new(prior.as_slice())
        .map_err(|e| BpriError::NonSimplexInput(format!("cannot sample prior: {e}")))?;
    let mut state_rng = substream(cfg.seed, STATE_STREAM);
    let mut noise_rng = substream(cfg.seed, NOISE_STREAM);

    let mut q = vec![1.0 / n_y as f64; n_y];
    let mut row = vec![0.0; n_y];
    let mut target = vec![0.0; n_y];
    let mut noisy = vec![0.0; n_y];
    let mut records = Vec::with_capacity(cfg.steps / cfg.log_stride + 1);
    let mut clamp_events = 0usize;
    let l = lambda.lambda();

    for t in 0..cfg.steps {
        let eta = cfg.schedule.eta(t);
        target.iter_mut().for_each(|v| *v = 0.0);
        let mut first_state = 0;
        let log_q = log_weights(&q);
        for k in 0..cfg.batch {
            let x = states.sample(&mut state_rng);
            if k == 0 {
                first_state = x;
            }
            let loss_row: &[f64] = match &noise {
                None => loss.row(x),
                Some(dist) => {
                    for (n, &base) in noisy.iter_mut().zip(loss.row(x)) {
                        *n = base + dist.sample(&mut noise_rng);
                    }
                    &noisy
                }
            };
            gibbs_row(loss_row, &log_q, l, &mut row);
            for (tv, rv) in target.iter_mut().zip(&row) {
                *tv += rv;
            }
        }
        let inv_b = 1.0 / cfg.batch as f64;
        for (qv, tv) in q.iter_mut().zip(&target) {
            *qv = (1.0 - eta) * *qv + eta * tv * inv_b;
        }
        if q.iter().any(|&v| v > 0.0 && v < CLAMP_FLOOR) {
            clamp_events += 1;
            q.iter_mut().filter(|v| **v < CLAMP_FLOOR).for_each(|v| *v = 0.0);
            warn!("marginal entry fell below {CLAMP_FLOOR:e} at step {t}; flushed to zero");
        }
        let s: f64 = q.iter().sum();
        q.iter_mut().for_each(|v| *v /= s);

        if t % cfg.log_stride == 0 || t + 1 == cfg.steps {
            records.push(SbaRecord {
                t,
                eta,
                sampled_state: first_state,
                kl_to_ref: cfg.reference.as_ref().map(|r| kl_unchecked(r.as_slice(), &q)),
                marginal: q.clone(),
            });
        }
    }
    if clamp_events > 0 {
        debug!("clamp guard fired {clamp_events} times");
    }

    let final_marginal = Marginal::new(q)?;
    let (final_channel, _) = gibbs_update(loss, &final_marginal, lambda)?;
    Ok(SbaTrajectory { records, final_marginal, final_channel, clamp_events })
}

/// Block means of `series` over consecutive windows of `window` entries,
/// starting after the first `burn_in` entries. A trailing partial window is
/// dropped.
pub fn window_means(series: &[f64], window: usize, burn_in: usize) -> Vec<f64> {
    if window == 0 || burn_in >= series.len() {
        return Vec::new();
    }
    series[burn_in..]
        .chunks_exact(window)
        .map(|c| c.iter().sum::<f64>() / window as f64)
        .collect()
}

/// Indices `i` of block means with `means[i + 1] > means[i]`.
pub fn trend_violations(means: &[f64]) -> Vec<usize> {
    means
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0])
        .map(|(i, _)| i)
        .collect()
}

/// How the mean-field expectation `E_p[f_q(·|X)]` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanFieldSampling {
    /// Sum over states weighted by the prior.
    Exact,
    MonteCarlo { n_samples: usize, seed: u64 },
}

/// Sup-norm distance between an estimate of `E_p[f_q(·|X)]` and the BA map `G(q)`.
pub fn mean_field_check(
    prior: &Prior,
    loss: &LossMatrix,
    lambda: PriceParam,
    q: &Marginal,
    sampling: MeanFieldSampling,
) -> Result<f64> {
    let exact = ba_operator(prior, loss, lambda, q)?;
    let n_y = q.len();
    let estimate = match sampling {
        MeanFieldSampling::Exact => {
            let (f, _) = gibbs_update(loss, q, lambda)?;
            let mut acc = vec![0.0; n_y];
            for x in 0..prior.len() {
                for (a, v) in acc.iter_mut().zip(f.row(x)) {
                    *a += prior[x] * v;
                }
            }
            acc
        }
        MeanFieldSampling::MonteCarlo { n_samples, seed } => {
            if n_samples == 0 {
                return Err(BpriError::InvalidParameter("n_samples must be at least 1".into()));
            }
            let (f, _) = gibbs_update(loss, q, lambda)?;
            let states = WeightedIndex::new(prior.as_slice())
                .map_err(|e| BpriError::NonSimplexInput(format!("cannot sample prior: {e}")))?;
            let mut rng = substream(seed, STATE_STREAM);
            let mut acc = vec![0.0; n_y];
            for _ in 0..n_samples {
                let x = states.sample(&mut rng);
                for (a, v) in acc.iter_mut().zip(f.row(x)) {
                    *a += v;
                }
            }
            acc.iter_mut().for_each(|a| *a /= n_samples as f64);
            acc
        }
    };
    Ok(estimate
        .iter()
        .zip(exact.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}
