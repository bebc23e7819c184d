//! Bayesian prediction under refinement costs priced by mutual information.
//!
//! A decision maker with prior `p(x)` picks a channel `f(y|x)` to minimize
//! `E[ℓ(X,Y)] + λ⁻¹ I(X;Y)`. The optimum is the Gibbs channel
//! `f(y|x) ∝ q(y) exp(-λ ℓ(x,y))` with self-consistent marginal `q`, found by
//! Blahut–Arimoto iteration ([`ba_solve`]). The other modules specialize
//! this to capacity constraints, stochastic approximation, logit choice,
//! Gaussian problems and finite MDPs.
//!
//! ```
//! use bpri_core::{ba_solve, LossMatrix, PriceParam, Prior};
//!
//! let prior = Prior::uniform(2).unwrap();
//! let sol = ba_solve(&prior, &LossMatrix::hamming(2), PriceParam::new(2.0).unwrap(), 1e-12, 10_000).unwrap();
//! // Bernoulli(1/2) under Hamming loss: distortion 1 / (1 + e^λ)
//! assert!((sol.expected_loss - 1.0 / (1.0 + 2f64.exp())).abs() < 1e-9);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ba;
pub mod choice;
pub mod dynamic;
pub mod error;
pub mod gaussian;
pub mod gibbs;
pub mod prob;
pub mod rng;
pub mod sba;
pub mod selftest;

pub use ba::{
    ba_solve, ba_solve_with, solve_capacity, support_set, trace_frontier, BaOptions, CapacityOutcome,
    CapacitySolution, FrontierPoint, GibbsSolution,
};
pub use choice::{curvature, mc_curvature, softmax_channel, CurvatureTableRow};
pub use dynamic::{soft_bellman_finite, soft_value_iteration, FiniteMdp, SoftPlan, StationaryPlan};
pub use error::{BpriError, Result};
pub use gibbs::{gibbs_update, LogPartition, PriceParam};
pub use prob::{entropy, kl, mutual_information, Channel, LossMatrix, Marginal, Prior};
pub use sba::{sba_run, NoiseModel, SbaTrajectory, StepSchedule};
