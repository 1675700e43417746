//! Combinatorial semi-bandits with unknown covariance.
//!
//! The crate provides small dense linear algebra, bandit instances with a
//! bounded linear-factor reward model, the streaming estimators behind the
//! OLS-UCBV index, a roster of policies, a seeded simulation runner and the
//! instance-dependent regret-rate quantities.

pub mod error;
pub mod estimation;
pub mod instance;
pub mod linalg;
pub mod policies;
pub mod rates;
pub mod seed;
pub mod simulation;

pub use error::{Error, Result};
pub use estimation::{EstimatorSnapshot, EstimatorState, PairCounts};
pub use instance::{
    make_disjoint_instance, ActionSet, GapProfile, Instance, InstanceFile, LowerBound, RandomSpec,
};
pub use linalg::{LowerTriangular, SymMatrix};
pub use policies::{Feedback, FeedbackMode, Policy, PolicyConfig, PolicyKind};
pub use rates::{rate_report, ratio_sweep, RateReport, SweepSpec, SweepTable};
pub use simulation::{run_batch, run_episode, Episode, RunConfig, RunResult, SimError};
