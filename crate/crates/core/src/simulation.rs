//! Seeded policy-vs-instance episodes and their aggregation.
//!
//! Within an episode each round draws the full reward vector (`d` uniform
//! factors, in item order) before the policy sees anything, whatever the
//! feedback kind. Two policies run with the same seed therefore face the
//! same reward stream. Replication `r` of a batch uses
//! `derive_seed(master_seed, r)` for every policy.

use std::io::{self, Write};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::error::Error;
use crate::estimation::EstimatorSnapshot;
use crate::instance::Instance;
use crate::policies::{Feedback, FeedbackMode, PolicyConfig, PolicyKind};
use crate::seed::derive_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{policy} aborted at round {round}: {source}")]
    Episode {
        policy: String,
        round: u64,
        source: Error,
    },
    #[error("{} episode(s) aborted: {}", .failures.len(), describe(.failures))]
    Batch { failures: Vec<ReplicationFailure> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationFailure {
    pub policy: String,
    pub replication: usize,
    pub message: String,
}

fn describe(f: &[ReplicationFailure]) -> String {
    f.iter()
        .map(|x| format!("{} replication {}: {}", x.policy, x.replication, x.message))
        .collect::<Vec<_>>()
        .join("; ")
}

/// One episode: cumulative pseudo-regret after each round and the actions played.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    /// `regret[t]` after `t` rounds; `regret[0] = 0`.
    pub regret: Vec<f64>,
    pub actions: Vec<usize>,
    pub exploration_rounds: Option<u64>,
    pub clamp_count: u64,
    pub snapshot: Option<EstimatorSnapshot>,
}

impl Episode {
    pub fn final_regret(&self) -> f64 {
        *self.regret.last().unwrap_or(&0.0)
    }
}

/// Runs `horizon` rounds of `policy` against `instance`.
pub fn run_episode(
    instance: &Instance,
    policy: &PolicyConfig,
    horizon: u64,
    seed: u64,
) -> Result<Episode, SimError> {
    run_episode_observed(instance, policy, horizon, seed, |_, _, _| {})
}

/// Like [`run_episode`], calling `on_round(t, action, rewards)` after each
/// round. Used by tests that need the reward stream.
pub fn run_episode_observed(
    instance: &Instance,
    config: &PolicyConfig,
    horizon: u64,
    seed: u64,
    mut on_round: impl FnMut(u64, usize, &[f64]),
) -> Result<Episode, SimError> {
    let label = config.label();
    let abort = |round: u64, source: Error| SimError::Episode {
        policy: label.clone(),
        round,
        source,
    };
    let gaps = instance.gap_profile().gaps;
    let mut policy = config.build(instance, horizon, seed).map_err(|e| abort(0, e))?;
    let mode = policy.feedback_mode();
    let d = instance.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut regret = Vec::with_capacity(horizon as usize + 1);
    regret.push(0.0);
    let mut actions = Vec::with_capacity(horizon as usize);
    let mut acc = 0.0;
    for t in 1..=horizon {
        let a = policy.select_action(t).map_err(|e| abort(t, e))?;
        if a >= instance.num_actions() {
            return Err(abort(t, Error::InvalidInput(format!("action {a} out of range"))));
        }
        instance.sample_reward_into(&mut rng, &mut u, &mut y);
        let items = instance.action_set.items(a);
        let feedback = match mode {
            FeedbackMode::Semi => Feedback::semi(items.iter().map(|&i| y[i]).collect()),
            FeedbackMode::Bandit | FeedbackMode::Ignored => {
                Feedback::bandit(items.iter().map(|&i| y[i]).sum())
            }
        };
        policy.observe_feedback(a, &feedback).map_err(|e| abort(t, e))?;
        acc += gaps[a];
        regret.push(acc);
        actions.push(a);
        on_round(t, a, &y);
    }
    let exploration_rounds = policy.exploration_rounds();
    if config.kind.explores_pairs() {
        let limit = (d * (d + 1)) as u64;
        if let Some(e) = exploration_rounds.filter(|&e| e > limit) {
            return Err(abort(
                horizon,
                Error::InvalidInput(format!("exploration lasted {e} rounds, limit {limit}")),
            ));
        }
    }
    Ok(Episode {
        regret,
        actions,
        exploration_rounds,
        clamp_count: policy.clamp_count(),
        snapshot: policy.snapshot(),
    })
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub instance: Instance,
    pub policies: Vec<PolicyConfig>,
    pub horizon: u64,
    pub replications: usize,
    pub master_seed: u64,
    pub record_every: u64,
    /// Keep the final estimator snapshot of replication 0.
    pub keep_snapshots: bool,
}

/// Smallest horizon that fits the pair-exploration phase plus a scored round.
pub fn min_horizon(d: usize) -> u64 {
    (d * (d + 1) + 2) as u64
}

impl RunConfig {
    pub fn new(instance: Instance, policies: Vec<PolicyConfig>, horizon: u64) -> Self {
        Self {
            instance,
            policies,
            horizon,
            replications: 1,
            master_seed: 0,
            record_every: 1,
            keep_snapshots: false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.instance
            .validate()
            .map_err(|e| SimError::Config(e.to_string()))?;
        if self.policies.is_empty() {
            return Err(SimError::Config("no policy configured".into()));
        }
        if self.replications == 0 {
            return Err(SimError::Config("replications must be >= 1".into()));
        }
        if self.record_every == 0 {
            return Err(SimError::Config("record_every must be >= 1".into()));
        }
        if self.horizon == 0 {
            return Err(SimError::Config("horizon must be >= 1".into()));
        }
        let need = min_horizon(self.instance.d());
        if self.horizon < need && self.policies.iter().any(|p| p.kind.explores_pairs()) {
            return Err(SimError::Config(format!(
                "horizon too short: T={} but pair exploration needs T >= d(d+1)+2 = {need}",
                self.horizon
            )));
        }
        if self.horizon < 3 && self.policies.iter().any(|p| p.kind == PolicyKind::Cucb) {
            return Err(SimError::Config("horizon too short: cucb needs T >= 3".into()));
        }
        Ok(())
    }

    /// Rounds at which curves are recorded: `0, k, 2k, …` and always `T`.
    pub fn recorded_rounds(&self) -> Vec<u64> {
        let mut r: Vec<u64> = (0..=self.horizon).step_by(self.record_every as usize).collect();
        if *r.last().unwrap() != self.horizon {
            r.push(self.horizon);
        }
        r
    }

    pub fn replication_seed(&self, r: usize) -> u64 {
        derive_seed(self.master_seed, r as u64)
    }
}

/// Aggregated curves of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyResult {
    pub label: String,
    pub kind: PolicyKind,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub final_regrets: Vec<f64>,
    pub exploration_lengths: Vec<Option<u64>>,
    pub clamp_counts: Vec<u64>,
    pub snapshot: Option<EstimatorSnapshot>,
}

impl PolicyResult {
    pub fn final_mean(&self) -> f64 {
        *self.mean.last().unwrap_or(&0.0)
    }

    pub fn final_std(&self) -> f64 {
        *self.std.last().unwrap_or(&0.0)
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub horizon: u64,
    pub replications: usize,
    pub rounds: Vec<u64>,
    pub policies: Vec<PolicyResult>,
    pub wall_time: Duration,
}

/// Equality ignores `wall_time`.
impl PartialEq for RunResult {
    fn eq(&self, other: &Self) -> bool {
        self.horizon == other.horizon
            && self.replications == other.replications
            && self.rounds == other.rounds
            && self.policies == other.policies
    }
}

impl RunResult {
    pub fn policy(&self, label: &str) -> Option<&PolicyResult> {
        self.policies.iter().find(|p| p.label == label)
    }

    /// Header `t,policy,mean_regret,std_regret,replications`, one row per
    /// recorded round per policy, `\n` line endings.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(b"t,policy,mean_regret,std_regret,replications\n")?;
        for p in &self.policies {
            for (k, t) in self.rounds.iter().enumerate() {
                writeln!(w, "{t},{},{},{},{}", p.label, p.mean[k], p.std[k], self.replications)?;
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

struct Sampled {
    curve: Vec<f64>,
    exploration: Option<u64>,
    clamps: u64,
    snapshot: Option<EstimatorSnapshot>,
}

fn run_job(config: &RunConfig, p: usize, r: usize, rounds: &[u64]) -> Result<Sampled, ReplicationFailure> {
    let policy = &config.policies[p];
    let ep = run_episode(&config.instance, policy, config.horizon, config.replication_seed(r))
        .map_err(|e| ReplicationFailure {
            policy: policy.label(),
            replication: r,
            message: e.to_string(),
        })?;
    Ok(Sampled {
        curve: rounds.iter().map(|&t| ep.regret[t as usize]).collect(),
        exploration: ep.exploration_rounds,
        clamps: ep.clamp_count,
        snapshot: if config.keep_snapshots && r == 0 { ep.snapshot } else { None },
    })
}

/// Runs every (policy, replication) pair in parallel; the reduction is keyed
/// by replication index so the result does not depend on scheduling.
pub fn run_batch(config: &RunConfig) -> Result<RunResult, SimError> {
    config.validate()?;
    let start = Instant::now();
    let rounds = config.recorded_rounds();
    let jobs: Vec<(usize, usize)> = (0..config.policies.len())
        .flat_map(|p| (0..config.replications).map(move |r| (p, r)))
        .collect();
    let results: Vec<Result<Sampled, ReplicationFailure>> = jobs
        .par_iter()
        .map(|&(p, r)| run_job(config, p, r, &rounds))
        .collect();
    aggregate(config, rounds, results, start)
}

/// Sequential batch executing replications in `schedule` order (a
/// permutation of `0..replications`). Produces the same result as
/// [`run_batch`].
pub fn run_batch_scheduled(config: &RunConfig, schedule: &[usize]) -> Result<RunResult, SimError> {
    config.validate()?;
    let mut sorted = schedule.to_vec();
    sorted.sort_unstable();
    if sorted != (0..config.replications).collect::<Vec<_>>() {
        return Err(SimError::Config("schedule must be a permutation of the replications".into()));
    }
    let start = Instant::now();
    let rounds = config.recorded_rounds();
    let n = config.replications;
    let mut slots: Vec<Option<Result<Sampled, ReplicationFailure>>> =
        (0..config.policies.len() * n).map(|_| None).collect();
    for &r in schedule {
        for p in (0..config.policies.len()).rev() {
            slots[p * n + r] = Some(run_job(config, p, r, &rounds));
        }
    }
    aggregate(config, rounds, slots.into_iter().map(|s| s.expect("every slot filled")).collect(), start)
}

fn aggregate(
    config: &RunConfig,
    rounds: Vec<u64>,
    results: Vec<Result<Sampled, ReplicationFailure>>,
    start: Instant,
) -> Result<RunResult, SimError> {
    let n = config.replications;
    let mut failures = Vec::new();
    let mut ok = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(s) => ok.push(s),
            Err(f) => failures.push(f),
        }
    }
    if !failures.is_empty() {
        return Err(SimError::Batch { failures });
    }
    let mut policies = Vec::with_capacity(config.policies.len());
    for (p, cfg) in config.policies.iter().enumerate() {
        let reps = &mut ok[p * n..(p + 1) * n];
        let k = rounds.len();
        let mut mean = vec![0.0; k];
        let mut std = vec![0.0; k];
        for j in 0..k {
            let m = reps.iter().map(|s| s.curve[j]).sum::<f64>() / n as f64;
            mean[j] = m;
            if n > 1 {
                let ss: f64 = reps.iter().map(|s| (s.curve[j] - m).powi(2)).sum();
                std[j] = (ss / (n - 1) as f64).sqrt();
            }
        }
        policies.push(PolicyResult {
            label: cfg.label(),
            kind: cfg.kind,
            mean,
            std,
            final_regrets: reps.iter().map(|s| *s.curve.last().unwrap()).collect(),
            exploration_lengths: reps.iter().map(|s| s.exploration).collect(),
            clamp_counts: reps.iter().map(|s| s.clamps).collect(),
            snapshot: reps[0].snapshot.take(),
        });
    }
    Ok(RunResult {
        horizon: config.horizon,
        replications: n,
        rounds,
        policies,
        wall_time: start.elapsed(),
    })
}
