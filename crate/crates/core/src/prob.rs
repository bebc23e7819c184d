//! Probability primitives on finite alphabets.
//!
//! Everything is measured in nats. The conventions `0 log 0 = 0` and
//! `0 log(0/0) = 0` are used throughout; mass of `p` on a point where `q`
//! vanishes is an error rather than `+inf`.

use serde::{Deserialize, Serialize};

use crate::error::{BpriError, Result};

/// Tolerance on `|sum - 1|` accepted by the simplex constructors.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Max-shifted `log(sum(exp(v)))`. Returns `-inf` for an empty slice or when
/// every entry is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

fn check_simplex(weights: &[f64], what: &str) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(BpriError::NonSimplexInput(format!("{what} is empty")));
    }
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(BpriError::NonSimplexInput(format!(
                "{what}[{i}] = {w} is not a finite nonnegative number"
            )));
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(BpriError::NonSimplexInput(format!(
            "{what} sums to {sum:.17}, not 1"
        )));
    }
    Ok(weights.iter().map(|w| w / sum).collect())
}

fn normalize_weights(weights: &[f64], what: &str) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(BpriError::NonSimplexInput(format!(
            "{what} has a negative or non-finite weight"
        )));
    }
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return Err(BpriError::NonSimplexInput(format!("{what} has zero total mass")));
    }
    Ok(weights.iter().map(|w| w / sum).collect())
}

macro_rules! simplex_newtype {
    ($name:ident, $what:literal) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
        pub struct $name(Vec<f64>);

        impl $name {
            /// Validates that `weights` lies on the simplex (tolerance
            /// [`SIMPLEX_TOL`]) and renormalizes away the residual.
            pub fn new(weights: Vec<f64>) -> Result<Self> {
                check_simplex(&weights, $what).map(Self)
            }

            /// Builds the distribution proportional to nonnegative `weights`.
            pub fn from_weights(weights: &[f64]) -> Result<Self> {
                normalize_weights(weights, $what).map(Self)
            }

            pub fn uniform(n: usize) -> Result<Self> {
                if n == 0 {
                    return Err(BpriError::NonSimplexInput(concat!($what, " is empty").into()));
                }
                Ok(Self(vec![1.0 / n as f64; n]))
            }

            pub fn point_mass(n: usize, at: usize) -> Result<Self> {
                if at >= n {
                    return Err(BpriError::DimensionMismatch(format!(
                        "point mass at {at} outside 0..{n}"
                    )));
                }
                let mut w = vec![0.0; n];
                w[at] = 1.0;
                Ok(Self(w))
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.0
            }

            /// Wraps a vector the caller has already normalized.
            #[allow(dead_code)]
            pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
                Self(weights)
            }
        }

        impl AsRef<[f64]> for $name {
            fn as_ref(&self) -> &[f64] {
                &self.0
            }
        }

        impl std::ops::Index<usize> for $name {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }

        impl TryFrom<Vec<f64>> for $name {
            type Error = BpriError;
            fn try_from(v: Vec<f64>) -> Result<Self> {
                Self::new(v)
            }
        }

        impl From<$name> for Vec<f64> {
            fn from(p: $name) -> Vec<f64> {
                p.0
            }
        }
    };
}

simplex_newtype!(Prior, "prior");
simplex_newtype!(Marginal, "marginal");

impl Prior {
    /// Indices carrying strictly positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i] > 0.0).collect()
    }
}

impl From<Marginal> for Prior {
    fn from(m: Marginal) -> Self {
        Prior(m.0)
    }
}

impl From<Prior> for Marginal {
    fn from(p: Prior) -> Self {
        Marginal(p.0)
    }
}

/// Row-stochastic matrix `f(y|x)`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    n_x: usize,
    n_y: usize,
    data: Vec<f64>,
}

impl Channel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_x = rows.len();
        if n_x == 0 {
            return Err(BpriError::NonSimplexInput("channel has no rows".into()));
        }
        let n_y = rows[0].len();
        let mut data = Vec::with_capacity(n_x * n_y);
        for (x, row) in rows.iter().enumerate() {
            if row.len() != n_y {
                return Err(BpriError::DimensionMismatch(format!(
                    "channel row {x} has length {}, expected {n_y}",
                    row.len()
                )));
            }
            data.extend(check_simplex(row, &format!("channel row {x}"))?);
        }
        Ok(Self { n_x, n_y, data })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(
            (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        )
    }

    /// Every row equal to `row`.
    pub fn constant(n_x: usize, row: &Marginal) -> Self {
        let mut data = Vec::with_capacity(n_x * row.len());
        for _ in 0..n_x {
            data.extend_from_slice(row.as_slice());
        }
        Self { n_x, n_y: row.len(), data }
    }

    pub(crate) fn from_raw(n_x: usize, n_y: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n_x * n_y);
        Self { n_x, n_y, data }
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.n_y..(x + 1) * self.n_y]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_y)
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[x * self.n_y + y]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(|r| r.to_vec()).collect()
    }

    /// Kernel composition `(f ∘ g)(z|x) = Σ_y f(y|x) g(z|y)`.
    pub fn compose(&self, post: &Channel) -> Result<Channel> {
        if self.n_y != post.n_x {
            return Err(BpriError::DimensionMismatch(format!(
                "cannot compose {}x{} with {}x{}",
                self.n_x, self.n_y, post.n_x, post.n_y
            )));
        }
        let mut data = vec![0.0; self.n_x * post.n_y];
        for x in 0..self.n_x {
            for y in 0..self.n_y {
                let w = self.get(x, y);
                if w == 0.0 {
                    continue;
                }
                for z in 0..post.n_y {
                    data[x * post.n_y + z] += w * post.get(y, z);
                }
            }
        }
        for row in data.chunks_mut(post.n_y) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        Ok(Channel::from_raw(self.n_x, post.n_y, data))
    }
}

/// Per-(state, report) loss `ℓ(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossMatrix {
    n_x: usize,
    n_y: usize,
    data: Vec<f64>,
    is_utility_negated: bool,
}

impl LossMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(rows, false)
    }

    /// Loss `ℓ = -U` built from a utility matrix.
    pub fn from_utility(rows: Vec<Vec<f64>>) -> Result<Self> {
        let negated = rows
            .into_iter()
            .map(|r| r.into_iter().map(|u| -u).collect())
            .collect();
        Self::build(negated, true)
    }

    fn build(rows: Vec<Vec<f64>>, is_utility_negated: bool) -> Result<Self> {
        let n_x = rows.len();
        if n_x == 0 || rows[0].is_empty() {
            return Err(BpriError::DimensionMismatch("loss matrix is empty".into()));
        }
        let n_y = rows[0].len();
        let mut data = Vec::with_capacity(n_x * n_y);
        for (x, row) in rows.into_iter().enumerate() {
            if row.len() != n_y {
                return Err(BpriError::DimensionMismatch(format!(
                    "loss row {x} has length {}, expected {n_y}",
                    row.len()
                )));
            }
            for (y, v) in row.into_iter().enumerate() {
                if !v.is_finite() {
                    return Err(BpriError::NonFiniteLoss { row: x, col: y });
                }
                data.push(v);
            }
        }
        Ok(Self { n_x, n_y, data, is_utility_negated })
    }

    /// Hamming loss `1{x != y}` on an `n`-letter alphabet.
    pub fn hamming(n: usize) -> Self {
        let data = (0..n * n)
            .map(|k| if k / n == k % n { 0.0 } else { 1.0 })
            .collect();
        Self { n_x: n, n_y: n, data, is_utility_negated: false }
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn is_utility_negated(&self) -> bool {
        self.is_utility_negated
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.n_y..(x + 1) * self.n_y]
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[x * self.n_y + y]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n_y).map(|r| r.to_vec()).collect()
    }

    /// Keeps only the listed states, in order.
    pub fn select_rows(&self, states: &[usize]) -> LossMatrix {
        let mut data = Vec::with_capacity(states.len() * self.n_y);
        for &x in states {
            data.extend_from_slice(self.row(x));
        }
        LossMatrix {
            n_x: states.len(),
            n_y: self.n_y,
            data,
            is_utility_negated: self.is_utility_negated,
        }
    }

    pub fn check_dims(&self, n_x: usize, n_y: Option<usize>) -> Result<()> {
        if self.n_x != n_x || n_y.is_some_and(|n| n != self.n_y) {
            return Err(BpriError::DimensionMismatch(format!(
                "loss is {}x{}, expected {}x{}",
                self.n_x,
                self.n_y,
                n_x,
                n_y.map_or("*".to_string(), |n| n.to_string())
            )));
        }
        Ok(())
    }
}

fn check_channel(prior: &Prior, f: &Channel) -> Result<()> {
    if prior.len() != f.n_x() {
        return Err(BpriError::DimensionMismatch(format!(
            "prior has {} states, channel has {}",
            prior.len(),
            f.n_x()
        )));
    }
    Ok(())
}

/// Shannon entropy `-Σ p log p` in nats.
pub fn entropy(p: &[f64]) -> Result<f64> {
    let p = check_simplex(p, "distribution")?;
    Ok(p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln())
        .sum::<f64>()
        .max(0.0))
}

/// `KL(p || q)` in nats. Fails when `p` is not absolutely continuous with
/// respect to `q`.
pub fn kl(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(BpriError::DimensionMismatch(format!(
            "kl between lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    let p = check_simplex(p, "p")?;
    let q = check_simplex(q, "q")?;
    let mut total = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(&q).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(BpriError::SupportViolation { index: i, mass: pi });
        }
        total += pi * (pi / qi).ln();
    }
    Ok(total.max(0.0))
}

/// `q(y) = Σ_x p(x) f(y|x)`.
pub fn induced_marginal(prior: &Prior, f: &Channel) -> Result<Marginal> {
    check_channel(prior, f)?;
    let mut q = vec![0.0; f.n_y()];
    for (x, row) in f.rows().enumerate() {
        let w = prior[x];
        if w == 0.0 {
            continue;
        }
        for (qy, &fy) in q.iter_mut().zip(row) {
            *qy += w * fy;
        }
    }
    let s: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v /= s);
    Ok(Marginal::from_raw(q))
}

/// `I(X;Y)` under the joint law `p(x) f(y|x)`.
pub fn mutual_information(prior: &Prior, f: &Channel) -> Result<f64> {
    let q = induced_marginal(prior, f)?;
    let mut total = 0.0;
    for (x, row) in f.rows().enumerate() {
        let w = prior[x];
        if w == 0.0 {
            continue;
        }
        let inner: f64 = row
            .iter()
            .zip(q.as_slice())
            .filter(|(&fy, _)| fy > 0.0)
            .map(|(&fy, &qy)| fy * (fy / qy).ln())
            .sum();
        total += w * inner;
    }
    Ok(total.max(0.0))
}

/// Expected log-posterior gain `E[log p(x|y) - log p(x)]`, computed from the
/// Bayes posteriors. Identical to [`mutual_information`] in exact arithmetic.
pub fn refinement_gain(prior: &Prior, f: &Channel) -> Result<f64> {
    check_channel(prior, f)?;
    let (n_x, n_y) = (f.n_x(), f.n_y());
    // joint and column-normalized posterior
    let mut joint = vec![0.0; n_x * n_y];
    for x in 0..n_x {
        for y in 0..n_y {
            joint[x * n_y + y] = prior[x] * f.get(x, y);
        }
    }
    let mut gain = 0.0;
    for y in 0..n_y {
        let col: f64 = (0..n_x).map(|x| joint[x * n_y + y]).sum();
        if col == 0.0 {
            continue;
        }
        for x in 0..n_x {
            let pxy = joint[x * n_y + y];
            if pxy == 0.0 {
                continue;
            }
            let posterior = pxy / col;
            gain += pxy * (posterior.ln() - prior[x].ln());
        }
    }
    Ok(gain)
}
