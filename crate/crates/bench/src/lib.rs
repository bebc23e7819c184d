//! Benchmark fixtures shared by the criterion benches.

use bpri_core::{FiniteMdp, LossMatrix, Prior};

/// Deterministic `n_x × n_y` instance with a skewed prior and scattered losses.
pub fn instance(n_x: usize, n_y: usize) -> (Prior, LossMatrix) {
    let w: Vec<f64> = (0..n_x).map(|x| 1.0 + (x % 3) as f64).collect();
    let rows = (0..n_x)
        .map(|x| (0..n_y).map(|y| ((x * 7 + y * 13) % 17) as f64 / 17.0 + if x % n_y == y { 0.0 } else { 0.5 }).collect())
        .collect();
    (Prior::from_weights(&w).unwrap(), LossMatrix::new(rows).unwrap())
}

/// Ring MDP: action 0 stays, action 1 moves clockwise, loss grows with distance from state 0.
pub fn ring_mdp(n: usize, horizon: usize) -> FiniteMdp {
    let mut transition = Vec::with_capacity(n * 2 * n);
    let mut stage_loss = Vec::with_capacity(n * 2);
    for s in 0..n {
        for a in 0..2 {
            let target = if a == 0 { s } else { (s + 1) % n };
            transition.extend((0..n).map(|s2| if s2 == target { 0.9 } else { 0.1 / (n - 1) as f64 }));
            stage_loss.push(s.min(n - s) as f64 / n as f64 + 0.1 * a as f64);
        }
    }
    FiniteMdp {
        n_states: n,
        n_actions: 2,
        transition,
        stage_loss,
        terminal_loss: vec![0.0; n],
        initial: vec![1.0 / n as f64; n],
        discount: Some(0.9),
        horizon: Some(horizon),
    }
}
