//! Online agents behind a single step interface.
//!
//! At round `t` (0-based, `t` observations folded so far) an agent holds
//! per-arm pull counts `N_t(a)` and reward sums, and emits the policy used to
//! draw the next action. KL-UCB builds that policy as the Gibbs policy of the
//! clipped optimistic reward estimate
//!
//! ```text
//! f̂⁺_t(a) = clip_[0,1]( f̂_t(a) + √(2·log(T·K/δ) / (N_t(a) ∨ 1)) )
//! π_{t+1}(a) ∝ π_ref(a)·exp(η·f̂⁺_t(a))
//! ```
//!
//! The three baselines share the statistics and differ only in how they turn
//! them into a policy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BanditInstance, ClipRange, Policy, RunConfig};
use crate::objective::softmax_policy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    KlUcb,
    ReferenceOnly,
    GreedySoftmax,
    ClassicUcbArgmax,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [
        AgentKind::KlUcb,
        AgentKind::ReferenceOnly,
        AgentKind::GreedySoftmax,
        AgentKind::ClassicUcbArgmax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::KlUcb => "kl_ucb",
            AgentKind::ReferenceOnly => "reference_only",
            AgentKind::GreedySoftmax => "greedy_softmax",
            AgentKind::ClassicUcbArgmax => "classic_ucb_argmax",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown agent `{s}`")))
    }
}

/// Hyperparameters fixed for the lifetime of an agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    pub eta: f64,
    pub reference: Policy,
    pub horizon: u64,
    pub confidence_delta: f64,
    /// Interval the optimistic estimates are clipped to; `[0, 1]` unless
    /// overridden.
    pub clip: ClipRange,
}

impl AgentParams {
    pub fn new(eta: f64, reference: Policy, horizon: u64, confidence_delta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidArgument("eta must be positive".into()));
        }
        if reference.num_arms() < 2 {
            return Err(Error::InvalidArgument(
                "at least two arms are required".into(),
            ));
        }
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if !(confidence_delta > 0.0 && confidence_delta < 1.0) {
            return Err(Error::InvalidArgument(
                "confidence_delta must lie in (0,1)".into(),
            ));
        }
        Ok(Self {
            eta,
            reference,
            horizon,
            confidence_delta,
            clip: ClipRange::UNIT,
        })
    }

    /// Parameters an agent would use on `inst` under `cfg`.
    pub fn for_instance(inst: &BanditInstance, cfg: &RunConfig) -> Result<Self> {
        let mut p = Self::new(
            inst.eta(),
            inst.reference().clone(),
            inst.horizon(),
            cfg.confidence_delta,
        )?;
        p.clip = cfg.clip;
        Ok(p)
    }

    #[inline]
    pub fn num_arms(&self) -> usize {
        self.reference.num_arms()
    }

    /// `2·log(T·K/δ)`, the numerator under the bonus square root.
    pub fn bonus_scale(&self) -> f64 {
        2.0 * (self.horizon as f64 * self.num_arms() as f64 / self.confidence_delta).ln()
    }
}

/// Sufficient statistics of an agent after `t` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    counts: Vec<u64>,
    reward_sums: Vec<f64>,
    t: u64,
    /// A policy has been emitted and its outcome is owed.
    awaiting: bool,
    params: AgentParams,
}

/// One observed `(action, reward)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub action: usize,
    pub reward: f64,
}

impl AgentState {
    pub fn new(params: AgentParams) -> Self {
        let k = params.num_arms();
        Self {
            counts: vec![0; k],
            reward_sums: vec![0.0; k],
            t: 0,
            awaiting: false,
            params,
        }
    }

    /// State with the given statistics; `t` is set to `Σ counts`. The next
    /// [`agent_step`] expects an observation iff `t ≥ 1`.
    pub fn from_stats(
        params: AgentParams,
        counts: Vec<u64>,
        reward_sums: Vec<f64>,
    ) -> Result<Self> {
        let k = params.num_arms();
        if counts.len() != k {
            return Err(Error::LengthMismatch {
                expected: k,
                got: counts.len(),
            });
        }
        if reward_sums.len() != k {
            return Err(Error::LengthMismatch {
                expected: k,
                got: reward_sums.len(),
            });
        }
        let t = counts.iter().sum();
        Ok(Self {
            counts,
            reward_sums,
            t,
            awaiting: t > 0,
            params,
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn reward_sums(&self) -> &[f64] {
        &self.reward_sums
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn params(&self) -> &AgentParams {
        &self.params
    }

    fn observe(&mut self, obs: Observation) -> Result<()> {
        let k = self.counts.len();
        if obs.action >= k {
            return Err(Error::InvalidArgument(format!(
                "action {} out of range for {k} arms",
                obs.action
            )));
        }
        self.counts[obs.action] += 1;
        self.reward_sums[obs.action] += obs.reward;
        self.t += 1;
        Ok(())
    }
}

/// `f̂_t(a) = sum(a) / (N_t(a) ∨ 1)`; unpulled arms read 0.
pub fn empirical_means(state: &AgentState) -> Vec<f64> {
    state
        .counts
        .iter()
        .zip(&state.reward_sums)
        .map(|(&n, &s)| s / n.max(1) as f64)
        .collect()
}

/// `b_t(a) = √(2·log(T·K/δ) / (N_t(a) ∨ 1))`.
pub fn bonus(state: &AgentState) -> Vec<f64> {
    let scale = state.params.bonus_scale();
    state
        .counts
        .iter()
        .map(|&n| (scale / n.max(1) as f64).sqrt())
        .collect()
}

/// `clip(f̂_t(a) + b_t(a))`, by default onto `[0, 1]`.
pub fn optimistic_rewards(state: &AgentState) -> Vec<f64> {
    empirical_means(state)
        .into_iter()
        .zip(bonus(state))
        .map(|(m, b)| state.params.clip.apply(m + b))
        .collect()
}

/// The KL-UCB policy: Gibbs policy of the clipped optimistic estimates.
pub fn kl_ucb_policy(state: &AgentState) -> Policy {
    softmax_policy(
        &state.params.reference,
        &optimistic_rewards(state),
        state.params.eta,
    )
}

fn greedy_softmax_policy(state: &AgentState) -> Policy {
    softmax_policy(
        &state.params.reference,
        &empirical_means(state),
        state.params.eta,
    )
}

/// Point mass on `argmax(f̂ + b)`, lowest index on ties.
fn ucb_argmax_policy(state: &AgentState) -> Policy {
    let scores: Vec<f64> = empirical_means(state)
        .into_iter()
        .zip(bonus(state))
        .map(|(m, b)| m + b)
        .collect();
    let mut best = 0;
    for (a, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = a;
        }
    }
    Policy::point_mass(scores.len(), best)
}

/// The policy `kind` plays from `state`, without folding anything in.
pub fn policy_for(kind: AgentKind, state: &AgentState) -> Policy {
    match kind {
        AgentKind::KlUcb => kl_ucb_policy(state),
        AgentKind::ReferenceOnly => state.params.reference.clone(),
        AgentKind::GreedySoftmax => greedy_softmax_policy(state),
        AgentKind::ClassicUcbArgmax => ucb_argmax_policy(state),
    }
}

/// Folds the previous round's observation into the state and returns the
/// updated state with the policy for the next round.
///
/// The first call (round 0) takes no observation; every later call must
/// carry the outcome of the policy emitted by the call before it.
pub fn agent_step(
    kind: AgentKind,
    mut state: AgentState,
    last: Option<Observation>,
) -> Result<(AgentState, Policy)> {
    match (state.awaiting, last) {
        (false, Some(_)) => {
            return Err(Error::ObservationMismatch {
                t: state.t,
                reason: "no observation expected before the first round",
            })
        }
        (true, None) => {
            return Err(Error::ObservationMismatch {
                t: state.t,
                reason: "missing observation for the previous round",
            })
        }
        (false, None) => {}
        (true, Some(obs)) => state.observe(obs)?,
    }
    debug_assert_eq!(state.counts.iter().sum::<u64>(), state.t);
    state.awaiting = true;
    let policy = policy_for(kind, &state);
    Ok((state, policy))
}
