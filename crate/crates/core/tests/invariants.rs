use bpri_core::ba::ba_solve;
use bpri_core::dynamic::{classical_dp_finite, soft_bellman_finite, FiniteMdp};
use bpri_core::gaussian::{stein_risk, stein_shrinkage_factor};
use bpri_core::gibbs::objective;
use bpri_core::prob::{entropy, kl, mutual_information};
use bpri_core::{softmax_channel, Channel, LossMatrix, PriceParam, Prior};
use proptest::prelude::*;

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    })
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    (2usize..5, 2usize..5).prop_flat_map(|(nx, ny)| {
        (simplex(nx), prop::collection::vec(prop::collection::vec(0.0f64..3.0, ny), nx))
    })
}

fn lam(v: f64) -> PriceParam {
    PriceParam::new(v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solution_is_a_channel_with_bounded_information((p, l) in instance(), lambda in 0.1f64..6.0) {
        let prior = Prior::new(p).unwrap();
        let loss = LossMatrix::new(l).unwrap();
        let sol = ba_solve(&prior, &loss, lam(lambda), 1e-11, 200_000).unwrap();
        for row in sol.channel.rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let h = entropy(prior.as_slice()).unwrap();
        prop_assert!(sol.mutual_info >= -1e-12 && sol.mutual_info <= h + 1e-12);
        prop_assert_eq!(sol.descent_violations, 0);
    }

    #[test]
    fn row_shifts_leave_the_channel_unchanged((p, l) in instance(), lambda in 0.1f64..6.0, shift in -5.0f64..5.0) {
        let prior = Prior::new(p).unwrap();
        let shifted: Vec<Vec<f64>> = l
            .iter()
            .enumerate()
            .map(|(x, row)| row.iter().map(|v| v + shift * (x as f64 + 1.0)).collect())
            .collect();
        let a = ba_solve(&prior, &LossMatrix::new(l).unwrap(), lam(lambda), 1e-12, 200_000).unwrap();
        let b = ba_solve(&prior, &LossMatrix::new(shifted).unwrap(), lam(lambda), 1e-12, 200_000).unwrap();
        for (ra, rb) in a.channel.rows().zip(b.channel.rows()) {
            for (x, y) in ra.iter().zip(rb) {
                prop_assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn information_rises_and_loss_falls_with_lambda((p, l) in instance(), lo in 0.2f64..3.0, gap in 0.2f64..3.0) {
        let prior = Prior::new(p).unwrap();
        let loss = LossMatrix::new(l).unwrap();
        let a = ba_solve(&prior, &loss, lam(lo), 1e-12, 500_000).unwrap();
        let b = ba_solve(&prior, &loss, lam(lo + gap), 1e-12, 500_000).unwrap();
        prop_assert!(b.mutual_info >= a.mutual_info - 1e-7);
        prop_assert!(b.expected_loss <= a.expected_loss + 1e-7);
    }

    #[test]
    fn softmax_is_a_distribution(u in prop::collection::vec(-30.0f64..30.0, 1..10), lambda in 1e-6f64..50.0) {
        let p = softmax_channel(&u, lam(lambda));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn kl_is_nonnegative(p in simplex(5), q in simplex(5)) {
        prop_assert!(kl(&p, &q).unwrap() >= 0.0);
        prop_assert!(kl(&p, &p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn shrinkage_factor_increases_with_lambda(a in 1e-3f64..100.0, b in 1e-3f64..100.0, tau2 in 0.05f64..5.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-9);
        let s_lo = stein_shrinkage_factor(lam(lo), tau2).unwrap();
        let s_hi = stein_shrinkage_factor(lam(hi), tau2).unwrap();
        prop_assert!(0.0 < s_lo && s_lo < s_hi && s_hi < 1.0);
    }

    #[test]
    fn stein_risk_at_zero_mean_is_variance_only(p in 1usize..50, lambda in 0.01f64..10.0, tau2 in 0.1f64..3.0) {
        let s = stein_shrinkage_factor(lam(lambda), tau2).unwrap();
        let r = stein_risk(lam(lambda), &vec![0.0; p], tau2).unwrap();
        prop_assert!((r - s * s * p as f64).abs() < 1e-12 * p as f64);
    }
}

/// Exhaustive search over 2×2 channels on a fine grid; BA must match or beat
/// every grid channel and come within grid resolution of the best.
#[test]
fn binary_solution_beats_grid_search() {
    let cases = [
        (vec![0.3, 0.7], vec![vec![0.0, 1.0], vec![2.0, 0.0]], 1.3),
        (vec![0.5, 0.5], vec![vec![0.2, 1.5], vec![0.9, 0.1]], 3.0),
        (vec![0.8, 0.2], vec![vec![0.0, 0.4], vec![1.0, 0.0]], 0.7),
    ];
    for (p, l, lambda) in cases {
        let prior = Prior::new(p).unwrap();
        let loss = LossMatrix::new(l).unwrap();
        let sol = ba_solve(&prior, &loss, lam(lambda), 1e-13, 1_000_000).unwrap();
        let n = 400;
        let mut best = f64::INFINITY;
        for i in 0..=n {
            for j in 0..=n {
                let a = i as f64 / n as f64;
                let b = j as f64 / n as f64;
                let f = Channel::new(vec![vec![a, 1.0 - a], vec![b, 1.0 - b]]).unwrap();
                best = best.min(objective(&prior, &loss, &f, lam(lambda)).unwrap());
            }
        }
        assert!(sol.objective_value <= best + 1e-12, "{} vs grid {}", sol.objective_value, best);
        assert!(best - sol.objective_value < 1e-4, "{} vs grid {}", sol.objective_value, best);
        let direct = objective(&prior, &loss, &sol.channel, lam(lambda)).unwrap();
        assert!((direct - sol.objective_value).abs() < 1e-10);
        assert!((mutual_information(&prior, &sol.channel).unwrap() - sol.mutual_info).abs() < 1e-12);
    }
}

#[test]
fn soft_plan_value_dominates_classical_and_tightens_with_lambda() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/mdp_3x2.json");
    let mdp = FiniteMdp::from_json_reader(std::fs::File::open(path).unwrap()).unwrap();
    let horizon = mdp.horizon.unwrap();
    let hard = classical_dp_finite(&mdp, horizon).unwrap();
    let hard_v0: f64 = mdp.initial.iter().zip(&hard.values[0]).map(|(p, v)| p * v).sum();
    let mut last = f64::INFINITY;
    for l in [0.5, 2.0, 8.0, 32.0, 128.0] {
        let plan = soft_bellman_finite(&mdp, lam(l), horizon, 1e-11, 2000).unwrap();
        let v0 = plan.initial_value();
        assert!(v0 >= hard_v0 - 1e-9, "lambda {l}: {v0} < {hard_v0}");
        assert!(v0 <= last + 1e-9, "lambda {l}: value went up");
        last = v0;
    }
}
