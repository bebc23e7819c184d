//! Randomized invariant checks shared by the `selftest` subcommand and the
//! test suite.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::choice::{curvature, mc_curvature, mnl_fisher_info, softmax_channel, tri_choice_curvature};
use crate::gaussian::js_positive_part_risk_mc;
use crate::gibbs::PriceParam;
use crate::prob::{kl, log_sum_exp, mutual_information, refinement_gain, Channel, LossMatrix, Prior};
use crate::rng::substream;
use crate::sba::{sba_run, NoiseModel, StepSchedule};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed margin or a short failure note.
    pub detail: String,
}

fn result(name: &'static str, passed: bool, detail: String) -> PropertyResult {
    PropertyResult { name, passed, detail }
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

fn random_channel(rng: &mut ChaCha8Rng, n_x: usize, n_y: usize) -> Channel {
    Channel::new((0..n_x).map(|_| random_simplex(rng, n_y)).collect()).expect("rows are on the simplex")
}

fn lam(v: f64) -> PriceParam {
    PriceParam::new(v).expect("positive price")
}

pub fn softmax_translation_invariance(seed: u64) -> PropertyResult {
    let mut rng = substream(seed, 101);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let k = rng.random_range(2..9);
        let u: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        let c = rng.random_range(-50.0..50.0);
        let l = lam(rng.random_range(0.05..5.0));
        let shifted: Vec<f64> = u.iter().map(|v| v + c).collect();
        let a = softmax_channel(&u, l);
        let b = softmax_channel(&shifted, l);
        worst = worst.max(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    result("softmax translation invariance", worst < 1e-12, format!("max diff {worst:e}"))
}

/// `H = λ F''(λ)` with `F(λ) = log Σ exp(λ u_j)`, by central differences.
pub fn curvature_matches_log_partition(seed: u64) -> PropertyResult {
    let mut rng = substream(seed, 102);
    let f = |u: &[f64], l: f64| log_sum_exp(&u.iter().map(|v| l * v).collect::<Vec<_>>());
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.random_range(2..8);
        let u: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
        let l = rng.random_range(0.1..4.0);
        let h = 1e-4;
        let fd = (f(&u, l + h) - 2.0 * f(&u, l) + f(&u, l - h)) / (h * h);
        let h_exact = curvature(&u, lam(l));
        worst = worst.max((h_exact - l * fd).abs() / h_exact.abs().max(1.0));
    }
    result("curvature = lambda * log-partition second derivative", worst < 1e-5, format!("max err {worst:e}"))
}

pub fn tri_choice_matches_general(seed: u64) -> PropertyResult {
    let mut rng = substream(seed, 103);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let theta = rng.random_range(-4.0..4.0);
        let l = lam(rng.random_range(0.05..5.0));
        worst = worst.max((tri_choice_curvature(theta, l) - curvature(&[theta, 0.0, -theta], l)).abs());
    }
    result("tri-choice closed form = general curvature", worst < 1e-12, format!("max diff {worst:e}"))
}

/// Fisher information against central differences of the choice probabilities.
pub fn fisher_matches_finite_differences(seed: u64) -> PropertyResult {
    let mut rng = substream(seed, 104);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let theta = rng.random_range(-2.0..2.0);
        let l = lam(rng.random_range(0.2..3.0));
        let h = 1e-5;
        let up = softmax_channel(&[theta + h, 0.0, -theta - h], l);
        let down = softmax_channel(&[theta - h, 0.0, -theta + h], l);
        let p = softmax_channel(&[theta, 0.0, -theta], l);
        let fd: f64 = (0..3)
            .map(|k| {
                let dp = (up[k] - down[k]) / (2.0 * h);
                dp * dp / p[k]
            })
            .sum();
        let exact = mnl_fisher_info(theta, l);
        worst = worst.max((exact - fd).abs() / exact.abs().max(1e-300));
    }
    result("Fisher information = finite differences", worst < 1e-6, format!("max rel err {worst:e}"))
}

pub fn pinsker(seed: u64) -> PropertyResult {
    let mut rng = substream(seed, 105);
    let mut worst = f64::INFINITY;
    for _ in 0..500 {
        let n = rng.random_range(2..10);
        let p = random_simplex(&mut rng, n);
        let q = random_simplex(&mut rng, n);
        let l1: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
        let d = kl(&p, &q).expect("q is strictly positive");
        worst = worst.min(d - 0.5 * l1 * l1);
    }
    result("Pinsker inequality", worst >= -1e-15, format!("min slack {worst:e}"))
}

pub fn data_processing(seed: u64) -> PropertyResult {
    let mut rng = substream(seed, 106);
    let mut worst = f64::INFINITY;
    for _ in 0..200 {
        let prior = Prior::new(random_simplex(&mut rng, 4)).expect("simplex");
        let f = random_channel(&mut rng, 4, 4);
        let g = random_channel(&mut rng, 4, 4);
        let fg = f.compose(&g).expect("matching dims");
        let before = mutual_information(&prior, &f).expect("valid");
        let after = mutual_information(&prior, &fg).expect("valid");
        worst = worst.min(before + 1e-10 - after);
    }
    result("data-processing inequality", worst >= 0.0, format!("min slack {worst:e}"))
}

pub fn refinement_gain_is_mutual_information(seed: u64) -> PropertyResult {
    let mut rng = substream(seed, 107);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n_x = rng.random_range(2..6);
        let n_y = rng.random_range(2..6);
        let prior = Prior::new(random_simplex(&mut rng, n_x)).expect("simplex");
        let f = random_channel(&mut rng, n_x, n_y);
        let a = refinement_gain(&prior, &f).expect("valid");
        let b = mutual_information(&prior, &f).expect("valid");
        worst = worst.max((a - b).abs());
    }
    result("refinement gain = mutual information", worst < 1e-10, format!("max diff {worst:e}"))
}

pub fn seed_determinism(seed: u64) -> PropertyResult {
    let grid = [0.5, 1.0, 2.0];
    let mc_same = mc_curvature(4, &grid, 50, seed).ok() == mc_curvature(4, &grid, 50, seed).ok();
    let prior = Prior::new(vec![0.2, 0.3, 0.5]).expect("simplex");
    let loss = LossMatrix::new(vec![vec![0.1, 2.5, 2.2], vec![2.9, 0.4, 2.6], vec![2.3, 2.7, 0.8]]).expect("finite");
    let run = || {
        sba_run(
            &prior,
            &loss,
            lam(2.0),
            StepSchedule::default(),
            NoiseModel::Gaussian { sigma: 0.5 },
            seed,
            2000,
            100,
        )
        .ok()
        .map(|t| (t.kl_series(), t.final_marginal))
    };
    let sba_same = run() == run();
    let js_same = js_positive_part_risk_mc(&[0.5; 4], 500, seed).ok() == js_positive_part_risk_mc(&[0.5; 4], 500, seed).ok();
    result(
        "seed determinism",
        mc_same && sba_same && js_same,
        format!("mc_curvature {mc_same}, sba {sba_same}, js {js_same}"),
    )
}

/// Every property, in a fixed order.
pub fn run_all(seed: u64) -> Vec<PropertyResult> {
    vec![
        softmax_translation_invariance(seed),
        curvature_matches_log_partition(seed),
        tri_choice_matches_general(seed),
        fisher_matches_finite_differences(seed),
        pinsker(seed),
        data_processing(seed),
        refinement_gain_is_mutual_information(seed),
        seed_determinism(seed),
    ]
}
