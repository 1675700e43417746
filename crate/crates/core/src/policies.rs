//! Action-selection policies sharing one interface.
//!
//! Semi-bandit policies (OLS-UCBV, CUCB, the proxy-covariance OLS-UCB
//! variant) read per-item rewards; bandit policies (UCB, UCBV) see only the
//! total reward of the played action. Every argmax breaks ties toward the
//! lowest action index, and forced exploration always plays the
//! lowest-index qualifying action.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::{design_matrix_from, exploration_factor, EstimatorSnapshot, EstimatorState};
use crate::instance::{ActionSet, Instance};
use crate::linalg::{clamp_sqrt, quad_form_unchecked, NormValue, SymMatrix};
use crate::seed::{derive_seed, POLICY_STREAM};

pub const DEFAULT_CUCB_ALPHA: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "ols-ucbv", alias = "OlsUcbv")]
    OlsUcbv,
    #[serde(rename = "cucb", alias = "Cucb")]
    Cucb,
    #[serde(rename = "ucb", alias = "UcbBandit")]
    UcbBandit,
    #[serde(rename = "ucbv", alias = "UcbvBandit")]
    UcbvBandit,
    #[serde(rename = "ols-ucb-proxy", alias = "OlsUcbProxy")]
    OlsUcbProxy,
    #[serde(rename = "uniform", alias = "UniformRandom")]
    UniformRandom,
    #[serde(rename = "oracle", alias = "Oracle")]
    Oracle,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::OlsUcbv => "ols-ucbv",
            PolicyKind::Cucb => "cucb",
            PolicyKind::UcbBandit => "ucb",
            PolicyKind::UcbvBandit => "ucbv",
            PolicyKind::OlsUcbProxy => "ols-ucb-proxy",
            PolicyKind::UniformRandom => "uniform",
            PolicyKind::Oracle => "oracle",
        }
    }

    pub fn feedback_mode(self) -> FeedbackMode {
        match self {
            PolicyKind::OlsUcbv | PolicyKind::Cucb | PolicyKind::OlsUcbProxy => FeedbackMode::Semi,
            PolicyKind::UcbBandit | PolicyKind::UcbvBandit => FeedbackMode::Bandit,
            PolicyKind::UniformRandom | PolicyKind::Oracle => FeedbackMode::Ignored,
        }
    }

    /// Policies whose forced exploration covers every reachable pair twice.
    pub fn explores_pairs(self) -> bool {
        matches!(self, PolicyKind::OlsUcbv | PolicyKind::OlsUcbProxy)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackMode {
    Semi,
    Bandit,
    Ignored,
}

/// What the environment reveals after a round.
#[derive(Debug, Clone, PartialEq)]
pub struct Feedback {
    /// Rewards of the played action's items, in item order.
    pub semi: Option<Vec<f64>>,
    pub total: f64,
}

impl Feedback {
    pub fn semi(values: Vec<f64>) -> Self {
        let total = values.iter().sum();
        Self {
            semi: Some(values),
            total,
        }
    }

    pub fn bandit(total: f64) -> Self {
        Self { semi: None, total }
    }
}

/// Policy configuration record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Proxy covariance for `ols-ucb-proxy`, as `d` rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            delta: None,
            alpha: None,
            gamma: None,
            label: None,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_gamma(mut self, gamma: &SymMatrix) -> Self {
        let d = gamma.dim();
        self.gamma = Some((0..d).map(|i| (0..d).map(|j| gamma.get(i, j)).collect()).collect());
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.name().to_string())
    }

    /// `δ`, defaulting to `1/T²`.
    pub fn delta_for(&self, horizon: u64) -> f64 {
        self.delta.unwrap_or_else(|| 1.0 / (horizon as f64 * horizon as f64))
    }

    /// Builds a fresh policy for one episode. `seed` only feeds policies that
    /// randomize (uniform), through a stream separate from the rewards.
    pub fn build(&self, instance: &Instance, horizon: u64, seed: u64) -> Result<Box<dyn Policy>> {
        let actions = instance.action_set.clone();
        let bounds = instance.bounds.clone();
        Ok(match self.kind {
            PolicyKind::OlsUcbv => Box::new(OlsUcbv::new(actions, bounds, horizon, self.delta_for(horizon))?),
            PolicyKind::Cucb => Box::new(Cucb::new(
                actions,
                bounds,
                horizon,
                self.alpha.unwrap_or(DEFAULT_CUCB_ALPHA),
            )?),
            PolicyKind::UcbBandit => Box::new(BanditUcb::new(&actions, &bounds, false)),
            PolicyKind::UcbvBandit => Box::new(BanditUcb::new(&actions, &bounds, true)),
            PolicyKind::OlsUcbProxy => {
                let d = instance.d();
                let gamma = match &self.gamma {
                    Some(rows) => SymMatrix::from_rows(rows)?,
                    None => SymMatrix::from_upper(d, |i, j| bounds[i] * bounds[j]),
                };
                Box::new(OlsUcbProxy::new(actions, bounds, gamma, horizon, self.delta_for(horizon))?)
            }
            PolicyKind::UniformRandom => Box::new(UniformRandom::new(
                actions.len(),
                derive_seed(seed, POLICY_STREAM),
            )),
            PolicyKind::Oracle => Box::new(Oracle {
                best: instance.gap_profile().optimal_index,
            }),
        })
    }
}

/// Interface shared by every policy. Rounds are numbered from 1.
pub trait Policy: Send {
    fn kind(&self) -> PolicyKind;

    fn feedback_mode(&self) -> FeedbackMode {
        self.kind().feedback_mode()
    }

    fn select_action(&mut self, t: u64) -> Result<usize>;

    fn observe_feedback(&mut self, action: usize, feedback: &Feedback) -> Result<()>;

    /// Rounds spent in forced exploration so far, for policies that have one.
    fn exploration_rounds(&self) -> Option<u64> {
        None
    }

    /// Negative quadratic forms clamped while scoring.
    fn clamp_count(&self) -> u64 {
        0
    }

    fn snapshot(&self) -> Option<EstimatorSnapshot> {
        None
    }
}

fn semi_values<'a>(kind: PolicyKind, feedback: &'a Feedback) -> Result<&'a [f64]> {
    feedback
        .semi
        .as_deref()
        .ok_or_else(|| Error::MissingFeedback(format!("{kind} requires semi-bandit feedback")))
}

/// Index of the largest score, lowest index on ties.
fn argmax(scores: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (p, s) in scores.into_iter().enumerate() {
        if s > best_score {
            best = p;
            best_score = s;
        }
    }
    best
}

/// `⟨a, μ̂⟩ + f ‖D⁻¹a‖_Z` with `x` scratch of length `d` (left zeroed).
fn ellipsoid_index(
    items: &[usize],
    mu_hat: &[f64],
    diag_counts: &[u64],
    z: &SymMatrix,
    f: f64,
    x: &mut [f64],
) -> (f64, NormValue) {
    for &i in items {
        x[i] = 1.0 / diag_counts[i] as f64;
    }
    let norm = clamp_sqrt(quad_form_unchecked(x, z));
    for &i in items {
        x[i] = 0.0;
    }
    let mean: f64 = items.iter().map(|&i| mu_hat[i]).sum();
    (mean + f * norm.value, norm)
}

fn check_items_explored(est: &EstimatorState, items: &[usize]) -> Result<()> {
    for (k, &i) in items.iter().enumerate() {
        for &j in &items[k..] {
            let n = est.counts().get(i, j);
            if n < 2 {
                return Err(Error::ExplorationIncomplete { i, j, count: n });
            }
        }
    }
    Ok(())
}

/// OLS-UCBV score of one action, using statistics through round `t`.
pub fn olsucbv_index(items: &[usize], est: &EstimatorState, t: u64) -> Result<f64> {
    check_items_explored(est, items)?;
    let z = est.design_matrix()?;
    let f = exploration_factor(t, est.d(), est.delta())?;
    let diag: Vec<u64> = (0..est.d()).map(|i| est.counts().get(i, i)).collect();
    let mut x = vec![0.0; est.d()];
    Ok(ellipsoid_index(items, &est.mu_hat_vec(), &diag, &z, f, &mut x).0)
}

/// Proxy-covariance variant: `Γ` replaces `Σ̂_t` inside the design matrix.
pub fn olsucb_proxy_index(
    items: &[usize],
    est: &EstimatorState,
    gamma: &SymMatrix,
    t: u64,
) -> Result<f64> {
    check_items_explored(est, items)?;
    let z = design_matrix_from(est.counts(), gamma, est.bounds())?;
    let f = exploration_factor(t, est.d(), est.delta())?;
    let diag: Vec<u64> = (0..est.d()).map(|i| est.counts().get(i, i)).collect();
    let mut x = vec![0.0; est.d()];
    Ok(ellipsoid_index(items, &est.mu_hat_vec(), &diag, &z, f, &mut x).0)
}

/// `Σ_{i∈a} μ̂_i + B_i √(α ln t / n_ii)`.
pub fn cucb_index(items: &[usize], est: &EstimatorState, t: f64, alpha: f64) -> Result<f64> {
    let log_t = t.max(1.0).ln();
    let mut acc = 0.0;
    for &i in items {
        let n = est.counts().get(i, i);
        if n == 0 {
            return Err(Error::ExplorationIncomplete { i, j: i, count: 0 });
        }
        let mu = est.mu_hat(i).unwrap_or(0.0);
        acc += mu + est.bounds()[i] * (alpha * log_t / n as f64).sqrt();
    }
    Ok(acc)
}

/// Running count, mean and squared-deviation sum of one action's totals.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ArmStats {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl ArmStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Unbiased sample variance; 0 below two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

/// `m̄ + b √(2 ln t / N)`.
pub fn ucb_bandit_index(stats: &ArmStats, t: f64, range: f64) -> Result<f64> {
    if stats.count == 0 {
        return Err(invalid("ucb index needs at least one pull"));
    }
    let n = stats.count as f64;
    Ok(stats.mean + range * (2.0 * t.max(1.0).ln() / n).sqrt())
}

/// `m̄ + √(2 V̂ ln t / N) + 3 b ln t / N`.
pub fn ucbv_bandit_index(stats: &ArmStats, t: f64, range: f64) -> Result<f64> {
    if stats.count < 2 {
        return Err(invalid("ucbv index needs at least two pulls"));
    }
    let n = stats.count as f64;
    let log_t = t.max(1.0).ln();
    Ok(stats.mean + (2.0 * stats.variance() * log_t / n).sqrt() + 3.0 * range * log_t / n)
}

/// Covariance-adaptive least-squares UCB.
#[derive(Debug, Clone)]
pub struct OlsUcbv {
    actions: ActionSet,
    est: EstimatorState,
    explored: u64,
    scratch: Vec<f64>,
}

impl OlsUcbv {
    pub fn new(actions: ActionSet, bounds: Vec<f64>, horizon: u64, delta: f64) -> Result<Self> {
        let est = EstimatorState::new(&actions, bounds, horizon, delta)?;
        let d = actions.d();
        Ok(Self {
            actions,
            est,
            explored: 0,
            scratch: vec![0.0; d],
        })
    }

    pub fn estimator(&self) -> &EstimatorState {
        &self.est
    }

    /// Scores of all actions given the current statistics.
    pub fn scores(&mut self) -> Result<Vec<f64>> {
        let z = self.est.design_matrix()?;
        let f = exploration_factor(self.est.rounds(), self.est.d(), self.est.delta())?;
        let mu = self.est.mu_hat_vec();
        let diag: Vec<u64> = (0..self.est.d()).map(|i| self.est.counts().get(i, i)).collect();
        let mut out = Vec::with_capacity(self.actions.len());
        for items in self.actions.iter() {
            let (s, norm) = ellipsoid_index(items, &mu, &diag, &z, f, &mut self.scratch);
            if norm.clamped {
                self.est.clamp_count += 1;
            }
            out.push(s);
        }
        Ok(out)
    }
}

impl Policy for OlsUcbv {
    fn kind(&self) -> PolicyKind {
        PolicyKind::OlsUcbv
    }

    fn select_action(&mut self, _t: u64) -> Result<usize> {
        if let Some(p) = (0..self.actions.len()).find(|&p| self.est.under_explored(self.actions.items(p))) {
            self.explored += 1;
            return Ok(p);
        }
        Ok(argmax(self.scores()?))
    }

    fn observe_feedback(&mut self, action: usize, feedback: &Feedback) -> Result<()> {
        let values = semi_values(self.kind(), feedback)?;
        self.est.observe(self.actions.items(action), values)
    }

    fn exploration_rounds(&self) -> Option<u64> {
        Some(self.explored)
    }

    fn clamp_count(&self) -> u64 {
        self.est.clamp_count
    }

    fn snapshot(&self) -> Option<EstimatorSnapshot> {
        Some(self.est.snapshot())
    }
}

/// OLS-UCB with a fixed proxy covariance `Γ` in place of `Σ̂_t`.
#[derive(Debug, Clone)]
pub struct OlsUcbProxy {
    actions: ActionSet,
    est: EstimatorState,
    gamma: SymMatrix,
    explored: u64,
    scratch: Vec<f64>,
}

impl OlsUcbProxy {
    pub fn new(
        actions: ActionSet,
        bounds: Vec<f64>,
        gamma: SymMatrix,
        horizon: u64,
        delta: f64,
    ) -> Result<Self> {
        if gamma.dim() != actions.d() {
            return Err(Error::DimensionMismatch {
                expected: actions.d(),
                got: gamma.dim(),
            });
        }
        let est = EstimatorState::new(&actions, bounds, horizon, delta)?;
        let d = actions.d();
        Ok(Self {
            actions,
            est,
            gamma,
            explored: 0,
            scratch: vec![0.0; d],
        })
    }
}

impl Policy for OlsUcbProxy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::OlsUcbProxy
    }

    fn select_action(&mut self, _t: u64) -> Result<usize> {
        if let Some(p) = (0..self.actions.len()).find(|&p| self.est.under_explored(self.actions.items(p))) {
            self.explored += 1;
            return Ok(p);
        }
        let z = design_matrix_from(self.est.counts(), &self.gamma, self.est.bounds())?;
        let f = exploration_factor(self.est.rounds(), self.est.d(), self.est.delta())?;
        let mu = self.est.mu_hat_vec();
        let diag: Vec<u64> = (0..self.est.d()).map(|i| self.est.counts().get(i, i)).collect();
        let mut scores = Vec::with_capacity(self.actions.len());
        for items in self.actions.iter() {
            let (s, norm) = ellipsoid_index(items, &mu, &diag, &z, f, &mut self.scratch);
            if norm.clamped {
                self.est.clamp_count += 1;
            }
            scores.push(s);
        }
        Ok(argmax(scores))
    }

    fn observe_feedback(&mut self, action: usize, feedback: &Feedback) -> Result<()> {
        let values = semi_values(self.kind(), feedback)?;
        self.est.observe(self.actions.items(action), values)
    }

    fn exploration_rounds(&self) -> Option<u64> {
        Some(self.explored)
    }

    fn clamp_count(&self) -> u64 {
        self.est.clamp_count
    }

    fn snapshot(&self) -> Option<EstimatorSnapshot> {
        Some(self.est.snapshot())
    }
}

/// Combinatorial UCB on per-item means.
#[derive(Debug, Clone)]
pub struct Cucb {
    actions: ActionSet,
    est: EstimatorState,
    alpha: f64,
}

impl Cucb {
    pub fn new(actions: ActionSet, bounds: Vec<f64>, horizon: u64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(invalid(format!("alpha must be > 0 (got {alpha})")));
        }
        // δ is unused by CUCB; any value in (0, 1) keeps the state valid.
        let est = EstimatorState::new(&actions, bounds, horizon.max(3), 0.5)?;
        Ok(Self { actions, est, alpha })
    }
}

impl Policy for Cucb {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Cucb
    }

    fn select_action(&mut self, t: u64) -> Result<usize> {
        let unseen = (0..self.actions.len()).find(|&p| {
            self.actions.items(p).iter().any(|&i| self.est.counts().get(i, i) == 0)
        });
        if let Some(p) = unseen {
            return Ok(p);
        }
        let mut scores = Vec::with_capacity(self.actions.len());
        for items in self.actions.iter() {
            scores.push(cucb_index(items, &self.est, t as f64, self.alpha)?);
        }
        Ok(argmax(scores))
    }

    fn observe_feedback(&mut self, action: usize, feedback: &Feedback) -> Result<()> {
        let values = semi_values(self.kind(), feedback)?;
        self.est.observe(self.actions.items(action), values)
    }

    fn snapshot(&self) -> Option<EstimatorSnapshot> {
        Some(self.est.snapshot())
    }
}

/// UCB or UCBV over whole actions with bandit feedback.
#[derive(Debug, Clone)]
pub struct BanditUcb {
    stats: Vec<ArmStats>,
    ranges: Vec<f64>,
    variance_aware: bool,
}

impl BanditUcb {
    pub fn new(actions: &ActionSet, bounds: &[f64], variance_aware: bool) -> Self {
        let ranges = actions
            .iter()
            .map(|items| items.iter().map(|&i| bounds[i]).sum())
            .collect();
        Self {
            stats: vec![ArmStats::default(); actions.len()],
            ranges,
            variance_aware,
        }
    }

    pub fn stats(&self, p: usize) -> &ArmStats {
        &self.stats[p]
    }
}

impl Policy for BanditUcb {
    fn kind(&self) -> PolicyKind {
        if self.variance_aware {
            PolicyKind::UcbvBandit
        } else {
            PolicyKind::UcbBandit
        }
    }

    fn select_action(&mut self, t: u64) -> Result<usize> {
        let needed = if self.variance_aware { 2 } else { 1 };
        if let Some(p) = self.stats.iter().position(|s| s.count < needed) {
            return Ok(p);
        }
        let mut scores = Vec::with_capacity(self.stats.len());
        for (s, &b) in self.stats.iter().zip(&self.ranges) {
            scores.push(if self.variance_aware {
                ucbv_bandit_index(s, t as f64, b)?
            } else {
                ucb_bandit_index(s, t as f64, b)?
            });
        }
        Ok(argmax(scores))
    }

    fn observe_feedback(&mut self, action: usize, feedback: &Feedback) -> Result<()> {
        self.stats[action].push(feedback.total);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct UniformRandom {
    num_actions: usize,
    rng: ChaCha8Rng,
}

impl UniformRandom {
    pub fn new(num_actions: usize, seed: u64) -> Self {
        Self {
            num_actions,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for UniformRandom {
    fn kind(&self) -> PolicyKind {
        PolicyKind::UniformRandom
    }

    fn select_action(&mut self, _t: u64) -> Result<usize> {
        Ok(self.rng.random_range(0..self.num_actions))
    }

    fn observe_feedback(&mut self, _action: usize, _feedback: &Feedback) -> Result<()> {
        Ok(())
    }
}

/// Always plays the optimal action.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub best: usize,
}

impl Policy for Oracle {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Oracle
    }

    fn select_action(&mut self, _t: u64) -> Result<usize> {
        Ok(self.best)
    }

    fn observe_feedback(&mut self, _action: usize, _feedback: &Feedback) -> Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::weighted_norm;
    use std::f64::consts::E;

    fn singletons(d: usize) -> ActionSet {
        ActionSet::new(d, (0..d).map(|i| vec![i]).collect())
    }

    #[test]
    fn fresh_ols_ucbv_explores_action_zero() {
        let mut p = OlsUcbv::new(singletons(3), vec![1.0; 3], 100, 0.01).unwrap();
        assert_eq!(p.select_action(1).unwrap(), 0);
        assert_eq!(p.exploration_rounds(), Some(1));
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax([1.0, 1.0, 1.0]), 0);
        assert_eq!(argmax([0.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn two_arm_index_prefers_higher_mean() {
        let mut p = OlsUcbv::new(singletons(2), vec![1.0; 2], 100, 0.01).unwrap();
        // identical deviations so both bonus widths match
        for (a, y) in [(0, 1.5), (0, 0.5), (1, 0.5), (1, -0.5)] {
            p.observe_feedback(a, &Feedback::semi(vec![y])).unwrap();
        }
        let scores = p.scores().unwrap();
        assert!((scores[0] - scores[1] - 1.0).abs() < 1e-9);
        assert_eq!(p.select_action(5).unwrap(), 0);
    }

    #[test]
    fn singleton_index_reduces_to_scalar() {
        let mut est = EstimatorState::new(&singletons(2), vec![1.0, 2.0], 100, 0.05).unwrap();
        for y in [0.3, 0.1, 0.4] {
            est.observe(&[1], &[y]).unwrap();
        }
        est.observe(&[0], &[0.0]).unwrap();
        est.observe(&[0], &[0.0]).unwrap();
        let t = est.rounds();
        let z = est.design_matrix().unwrap();
        let f = exploration_factor(t, 2, 0.05).unwrap();
        let expect = est.mu_hat(1).unwrap() + f * z.get(1, 1).sqrt() / 3.0;
        let got = olsucbv_index(&[1], &est, t).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn pair_index_direct_quadratic_form() {
        // a = (1,1), n_ii = 2, Z = [[8,1],[1,8]], f = 1
        let z = SymMatrix::from_rows(&[vec![8.0, 1.0], vec![1.0, 8.0]]).unwrap();
        let mut x = vec![0.0; 2];
        let (s, _) = ellipsoid_index(&[0, 1], &[0.0, 0.0], &[2, 2], &z, 1.0, &mut x);
        assert!((s - 4.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(x, vec![0.0, 0.0]);
        let direct = weighted_norm(&[0.5, 0.5], &z).unwrap().value;
        assert_eq!(s, direct);
    }

    #[test]
    fn zero_norm_index_is_mean() {
        let z = SymMatrix::zeros(2);
        let mut x = vec![0.0; 2];
        let (s, _) = ellipsoid_index(&[0, 1], &[0.25, 0.5], &[3, 3], &z, 7.0, &mut x);
        assert_eq!(s, 0.75);
    }

    #[test]
    fn index_needs_exploration() {
        let est = EstimatorState::new(&singletons(2), vec![1.0; 2], 100, 0.05).unwrap();
        assert!(matches!(
            olsucbv_index(&[0], &est, 2),
            Err(Error::ExplorationIncomplete { .. })
        ));
    }

    #[test]
    fn cucb_examples() {
        let mut est = EstimatorState::new(&singletons(2), vec![1.0; 2], 100, 0.05).unwrap();
        for _ in 0..6 {
            est.observe(&[0], &[0.2]).unwrap();
            est.observe(&[1], &[0.2]).unwrap();
        }
        // singleton, B = 1, α = 1.5, t = e², n = 6 → μ̂ + √(3/6)
        let a = cucb_index(&[0], &est, E * E, 1.5).unwrap();
        assert!((a - (0.2 + 0.5f64.sqrt())).abs() < 1e-12);
        let b = cucb_index(&[1], &est, E * E, 1.5).unwrap();
        assert_eq!(a, b);
        for _ in 0..100_000 {
            est.observe(&[0], &[0.2]).unwrap();
        }
        assert!((cucb_index(&[0], &est, 40.0, 1.5).unwrap() - 0.2).abs() < 0.01);
        assert!(cucb_index(&[0], &EstimatorState::new(&singletons(2), vec![1.0; 2], 100, 0.05).unwrap(), 3.0, 1.5).is_err());
    }

    #[test]
    fn bandit_indices() {
        let mut s = ArmStats::default();
        s.push(0.0);
        s.push(2.0);
        // t = e, N = 2, b = 1 → m̄ + 1
        assert!((ucb_bandit_index(&s, E, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(ucb_bandit_index(&ArmStats::default(), 3.0, 1.0).is_err());

        let mut s = ArmStats::default();
        for _ in 0..4 {
            s.push(1.0);
        }
        assert_eq!(s.variance(), 0.0);
        let v = ucbv_bandit_index(&s, 10.0, 1.0).unwrap();
        assert!((v - (1.0 + 3.0 * 10f64.ln() / 4.0)).abs() < 1e-12);

        // N = 4, V̂ = 1, t = e², b = 1 → m̄ + 1 + 1.5
        let mut s = ArmStats::default();
        let x = 0.75f64.sqrt();
        for v in [-x, x, -x, x] {
            s.push(v);
        }
        assert!((s.variance() - 1.0).abs() < 1e-15);
        let v = ucbv_bandit_index(&s, E * E, 1.0).unwrap();
        assert!((v - (s.mean + 2.5)).abs() < 1e-12);
        let mut one = ArmStats::default();
        one.push(1.0);
        assert!(ucbv_bandit_index(&one, 3.0, 1.0).is_err());
    }

    #[test]
    fn bandit_sweeps() {
        let actions = singletons(3);
        let mut ucb = BanditUcb::new(&actions, &[1.0; 3], false);
        let mut order = Vec::new();
        for t in 1..=3 {
            let a = ucb.select_action(t).unwrap();
            order.push(a);
            ucb.observe_feedback(a, &Feedback::bandit(0.0)).unwrap();
        }
        assert_eq!(order, vec![0, 1, 2]);
        for t in 4..10 {
            let a = ucb.select_action(t).unwrap();
            ucb.observe_feedback(a, &Feedback::bandit(0.0)).unwrap();
        }
        let pulls: u64 = (0..3).map(|p| ucb.stats(p).count).sum();
        assert_eq!(pulls, 9);

        let mut ucbv = BanditUcb::new(&actions, &[1.0; 3], true);
        let mut order = Vec::new();
        for t in 1..=6 {
            let a = ucbv.select_action(t).unwrap();
            order.push(a);
            ucbv.observe_feedback(a, &Feedback::bandit(1.0)).unwrap();
        }
        assert_eq!(order, vec![0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn proxy_matches_ols_ucbv_when_gamma_is_frozen_sigma_hat() {
        let actions = ActionSet::new(3, vec![vec![0, 1], vec![1, 2], vec![0, 2]]);
        let mut est = EstimatorState::new(&actions, vec![1.0, 0.5, 2.0], 50, 0.1).unwrap();
        let ys = [[0.1, 0.4, -0.2], [0.3, -0.1, 0.5], [-0.5, 0.2, 0.0], [0.2, 0.2, 0.7]];
        for (r, y) in ys.iter().enumerate() {
            for p in 0..3 {
                let items = actions.items(p);
                let v: Vec<f64> = items.iter().map(|&i| y[i] + 0.01 * (r + p) as f64).collect();
                est.observe(items, &v).unwrap();
            }
        }
        let gamma = est.sigma_hat().unwrap();
        let t = est.rounds();
        for items in actions.iter() {
            let a = olsucbv_index(items, &est, t).unwrap();
            let b = olsucb_proxy_index(items, &est, &gamma, t).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn looser_proxy_means_larger_bonus() {
        let actions = ActionSet::new(2, vec![vec![0, 1]]);
        let mut est = EstimatorState::new(&actions, vec![1.0, 1.0], 50, 0.1).unwrap();
        for _ in 0..3 {
            est.observe(&[0, 1], &[0.0, 0.0]).unwrap();
        }
        let sigma = SymMatrix::diagonal(&[0.3, 0.5]);
        let loose = SymMatrix::identity(2).scaled(2.0);
        let t = est.rounds();
        let a = olsucb_proxy_index(&[0, 1], &est, &sigma, t).unwrap();
        let b = olsucb_proxy_index(&[0, 1], &est, &loose, t).unwrap();
        assert!(b > a);

        let zero = olsucb_proxy_index(&[0, 1], &est, &SymMatrix::zeros(2), t).unwrap();
        let f = exploration_factor(t, 2, 0.1).unwrap();
        let expect = f * (2.0 * 1.0 / 9.0 + 2.0 * 1.0 / 9.0f64).sqrt();
        assert!((zero - expect).abs() < 1e-12);
    }

    #[test]
    fn semi_policies_reject_bandit_feedback() {
        let mut p = OlsUcbv::new(singletons(2), vec![1.0; 2], 100, 0.01).unwrap();
        assert!(matches!(
            p.observe_feedback(0, &Feedback::bandit(1.0)),
            Err(Error::MissingFeedback(_))
        ));
    }

    #[test]
    fn config_parses_kinds() {
        let c: PolicyConfig = serde_json::from_str(r#"{"kind":"ols-ucbv","delta":0.01}"#).unwrap();
        assert_eq!(c.kind, PolicyKind::OlsUcbv);
        assert_eq!(c.delta_for(10), 0.01);
        let c: PolicyConfig = serde_json::from_str(r#"{"kind":"cucb"}"#).unwrap();
        assert_eq!(c.delta_for(10), 0.01);
        assert!(serde_json::from_str::<PolicyConfig>(r#"{"kind":"escb"}"#).is_err());
        assert!(serde_json::from_str::<PolicyConfig>(r#"{"kind":"ucb","beta":1}"#).is_err());
    }
}
