//! KL-regularized multi-armed bandits.
//!
//! - [`model`]: policies, instances, noise, run configuration
//! - [`objective`]: the regularized objective, its Gibbs optimum and gaps
//! - [`algorithms`]: KL-UCB and baseline agents
//! - [`instances`]: hard-instance families and random instances
//! - [`simulator`]: seeded runs with exact regret and diagnostics
//! - [`oracle`]: brute-force checks of the closed forms
//! - [`experiments`]: sweeps, scaling fits, Bayes regret

// `!(x > 0.0)` is used on purpose: it rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod error;
pub mod experiments;
pub mod instances;
pub mod model;
pub mod objective;
pub mod oracle;
pub mod plot;
pub mod rng;
pub mod simulator;

pub use algorithms::{agent_step, AgentKind, AgentParams, AgentState, Observation};
pub use error::{Error, Result};
pub use experiments::{ExperimentConfig, InstanceSource, ScalingFit, ScalingModel, SweepRow};
pub use instances::{FastFamilySample, InstancePair, SlowFamily};
pub use model::{
    validate_instance, BanditInstance, ClipRange, InstanceWarning, NoiseModel, Policy, RunConfig,
};
pub use objective::{GapEvaluator, ObjectiveReport};
pub use simulator::{BatchSummary, RunRecord};
