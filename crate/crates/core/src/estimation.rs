//! Sufficient statistics for covariance-adaptive indices.
//!
//! [`EstimatorState`] keeps pair counts `n_(i,j)`, per-item reward sums and
//! the running numerator of the lag-centered covariance estimator
//!
//! ```text
//! χ̂_t(i,j) = 1/n_t(i,j) · Σ_s A_si A_sj 1{n_s(i,j) ≥ 2} (Y_si - μ̂_{s-1,i})(Y_sj - μ̂_{s-1,j})
//! ```
//!
//! Each increment is centered on the means *before* the round's own update.
//! Everything derived (`Σ̂_t`, `Ẑ_t`) is recomputed on demand from these sums.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::instance::ActionSet;
use crate::linalg::SymMatrix;

/// Symmetric co-occurrence counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairCounts {
    d: usize,
    n: Vec<u64>,
}

impl PairCounts {
    pub fn new(d: usize) -> Self {
        Self { d, n: vec![0; d * d] }
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.n[i * self.d + j]
    }

    /// Increments every pair inside `items` (which must be sorted, unique).
    pub fn record(&mut self, items: &[usize]) {
        for (k, &i) in items.iter().enumerate() {
            for &j in &items[k..] {
                self.n[i * self.d + j] += 1;
                if i != j {
                    self.n[j * self.d + i] += 1;
                }
            }
        }
    }

    /// Smallest count over all pairs inside `items`.
    pub fn min_within(&self, items: &[usize]) -> u64 {
        let mut m = u64::MAX;
        for (k, &i) in items.iter().enumerate() {
            for &j in &items[k..] {
                m = m.min(self.get(i, j));
            }
        }
        m
    }

    pub fn as_matrix(&self) -> SymMatrix {
        SymMatrix::from_upper(self.d, |i, j| self.get(i, j) as f64)
    }

    /// Symmetry and `n_ij ≤ min(n_ii, n_jj)`.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for i in 0..self.d {
            for j in 0..self.d {
                let v = self.get(i, j);
                if v != self.get(j, i) {
                    return Err(format!("counts asymmetric at ({i}, {j})"));
                }
                if v > self.get(i, i).min(self.get(j, j)) {
                    return Err(format!("count ({i}, {j}) exceeds its diagonal counts"));
                }
            }
        }
        Ok(())
    }
}

/// `h_{T,δ} = ln(5 d² T² / δ)`.
pub fn confidence_log(d: usize, horizon: u64, delta: f64) -> f64 {
    let (d, t) = (d as f64, horizon as f64);
    (5.0 * d * d * t * t / delta).ln()
}

/// Covariance bonus `3 B_i B_j (h/√n + h² ln T / n)` for a precomputed `h`.
#[inline]
pub fn bonus_from_parts(n: u64, bi: f64, bj: f64, h: f64, log_t: f64) -> f64 {
    let n = n as f64;
    3.0 * bi * bj * (h / n.sqrt() + h * h * log_t / n)
}

fn check_horizon_delta(horizon: u64, delta: f64) -> Result<()> {
    if horizon < 3 {
        return Err(invalid(format!("horizon must be >= 3 (got {horizon})")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1) (got {delta})")));
    }
    Ok(())
}

/// Covariance confidence bonus for a pair seen `n` times.
pub fn bonus(n: u64, bi: f64, bj: f64, d: usize, horizon: u64, delta: f64) -> Result<f64> {
    check_horizon_delta(horizon, delta)?;
    if n == 0 {
        return Err(invalid("pair count must be >= 1"));
    }
    let h = confidence_log(d, horizon, delta);
    Ok(bonus_from_parts(n, bi, bj, h, (horizon as f64).ln()))
}

/// `f_{t,δ} = 6d ln ln(1+t) + 3d ln(1+e) + ln(1/δ)`, defined for `t ≥ 2`.
pub fn exploration_factor(t: u64, d: usize, delta: f64) -> Result<f64> {
    if t < 2 {
        return Err(invalid(format!("exploration factor needs t >= 2 (got {t})")));
    }
    let d = d as f64;
    let t = t as f64;
    Ok(6.0 * d * (1.0 + t).ln().ln() + 3.0 * d * (1.0 + std::f64::consts::E).ln() - delta.ln())
}

/// `(N ∘ M) + diag(M_ii n_ii) + d · diag(B_i²)`.
pub fn design_matrix_from(counts: &PairCounts, m: &SymMatrix, bounds: &[f64]) -> Result<SymMatrix> {
    let d = counts.d();
    if m.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: m.dim(),
        });
    }
    if bounds.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bounds.len(),
        });
    }
    let mut z = SymMatrix::from_upper(d, |i, j| counts.get(i, j) as f64 * m.get(i, j));
    let df = d as f64;
    for i in 0..d {
        z.add_diagonal(i, m.get(i, i) * counts.get(i, i) as f64 + df * bounds[i] * bounds[i]);
    }
    Ok(z)
}

/// Running statistics for one episode.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    counts: PairCounts,
    mean_sums: Vec<f64>,
    cov_sums: Vec<f64>,
    bounds: Vec<f64>,
    reachable: Vec<bool>,
    horizon: u64,
    delta: f64,
    rounds: u64,
    /// Number of clamped (negative) quadratic forms seen by index evaluations.
    pub clamp_count: u64,
}

impl EstimatorState {
    pub fn new(actions: &ActionSet, bounds: Vec<f64>, horizon: u64, delta: f64) -> Result<Self> {
        check_horizon_delta(horizon, delta)?;
        let d = actions.d();
        if bounds.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bounds.len(),
            });
        }
        Ok(Self {
            counts: PairCounts::new(d),
            mean_sums: vec![0.0; d],
            cov_sums: vec![0.0; d * d],
            bounds,
            reachable: actions.reachable_pairs(),
            horizon,
            delta,
            rounds: 0,
            clamp_count: 0,
        })
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.counts.d()
    }

    pub fn counts(&self) -> &PairCounts {
        &self.counts
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Rounds observed so far.
    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn is_reachable(&self, i: usize, j: usize) -> bool {
        self.reachable[i * self.d() + j]
    }

    /// Folds one round of semi-bandit feedback. `values[k]` is the reward
    /// of `items[k]`; `items` must be sorted and unique.
    ///
    /// Order: covariance increments with the previous means, then counts,
    /// then the mean sums.
    pub fn observe(&mut self, items: &[usize], values: &[f64]) -> Result<()> {
        let d = self.d();
        if items.is_empty() {
            return Err(invalid("observed action is empty"));
        }
        if values.len() != items.len() {
            return Err(Error::MissingFeedback(format!(
                "{} reward(s) for {} item(s)",
                values.len(),
                items.len()
            )));
        }
        if items.windows(2).any(|w| w[0] >= w[1]) || items[items.len() - 1] >= d {
            return Err(invalid("action items must be sorted, unique and < d"));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::MissingFeedback(format!("reward of item {} is not finite", items[k])));
        }

        let dev: Vec<f64> = items
            .iter()
            .zip(values)
            .map(|(&i, &y)| match self.counts.get(i, i) {
                0 => 0.0,
                n => y - self.mean_sums[i] / n as f64,
            })
            .collect();
        for (k1, &i) in items.iter().enumerate() {
            for (k2, &j) in items.iter().enumerate().skip(k1) {
                if self.counts.get(i, j) + 1 >= 2 {
                    let inc = dev[k1] * dev[k2];
                    self.cov_sums[i * d + j] += inc;
                    if i != j {
                        self.cov_sums[j * d + i] += inc;
                    }
                }
            }
        }
        self.counts.record(items);
        for (&i, &y) in items.iter().zip(values) {
            self.mean_sums[i] += y;
        }
        self.rounds += 1;
        Ok(())
    }

    pub fn mu_hat(&self, i: usize) -> Option<f64> {
        let n = self.counts.get(i, i);
        (n >= 1).then(|| self.mean_sums[i] / n as f64)
    }

    /// `μ̂`, with 0 on items never observed.
    pub fn mu_hat_vec(&self) -> Vec<f64> {
        (0..self.d()).map(|i| self.mu_hat(i).unwrap_or(0.0)).collect()
    }

    pub fn chi_hat(&self, i: usize, j: usize) -> Option<f64> {
        let n = self.counts.get(i, j);
        (n >= 2).then(|| self.cov_sums[i * self.d() + j] / n as f64)
    }

    /// `χ̂` with 0 where a pair has fewer than two observations.
    pub fn chi_hat_matrix(&self) -> SymMatrix {
        SymMatrix::from_upper(self.d(), |i, j| self.chi_hat(i, j).unwrap_or(0.0))
    }

    /// `h_{T,δ}` for this state.
    pub fn confidence_log(&self) -> f64 {
        confidence_log(self.d(), self.horizon, self.delta)
    }

    /// Covariance bonus of pair `(i, j)` at its current count.
    pub fn pair_bonus(&self, i: usize, j: usize) -> Option<f64> {
        let n = self.counts.get(i, j);
        (n >= 1).then(|| {
            bonus_from_parts(
                n,
                self.bounds[i],
                self.bounds[j],
                self.confidence_log(),
                (self.horizon as f64).ln(),
            )
        })
    }

    /// Coefficient-wise upper confidence bound `Σ̂ = χ̂ + 𝓑` on reachable
    /// pairs; unreachable pairs are 0.
    pub fn sigma_hat(&self) -> Result<SymMatrix> {
        let d = self.d();
        let h = self.confidence_log();
        let log_t = (self.horizon as f64).ln();
        let mut out = SymMatrix::zeros(d);
        for i in 0..d {
            for j in i..d {
                if !self.is_reachable(i, j) {
                    continue;
                }
                let n = self.counts.get(i, j);
                if n < 2 {
                    return Err(Error::ExplorationIncomplete { i, j, count: n });
                }
                let chi = self.cov_sums[i * d + j] / n as f64;
                out.set(i, j, chi + bonus_from_parts(n, self.bounds[i], self.bounds[j], h, log_t));
            }
        }
        Ok(out)
    }

    /// Regularized empirical design matrix `Ẑ_t` via the Hadamard identity.
    pub fn design_matrix(&self) -> Result<SymMatrix> {
        let sigma = self.sigma_hat()?;
        design_matrix_from(&self.counts, &sigma, &self.bounds)
    }

    /// Whether some pair inside `items` has been seen at most once.
    pub fn under_explored(&self, items: &[usize]) -> bool {
        self.counts.min_within(items) <= 1
    }

    pub fn snapshot(&self) -> EstimatorSnapshot {
        let d = self.d();
        EstimatorSnapshot {
            rounds: self.rounds,
            counts: (0..d).map(|i| (0..d).map(|j| self.counts.get(i, j)).collect()).collect(),
            mu_hat: (0..d).map(|i| self.mu_hat(i)).collect(),
            chi_hat: (0..d).map(|i| (0..d).map(|j| self.chi_hat(i, j)).collect()).collect(),
            clamp_count: self.clamp_count,
        }
    }
}

/// Read-only JSON view of an [`EstimatorState`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSnapshot {
    pub rounds: u64,
    pub counts: Vec<Vec<u64>>,
    pub mu_hat: Vec<Option<f64>>,
    pub chi_hat: Vec<Vec<Option<f64>>>,
    pub clamp_count: u64,
}
