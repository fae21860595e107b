//! Closed-form KL-regularized math.
//!
//! The objective of a policy `π` on an instance is
//!
//! ```text
//! J(π) = E_{a~π}[r(a)] − KL(π ‖ π_ref) / η
//! ```
//!
//! and it is maximized by the Gibbs policy `π*(a) ∝ π_ref(a)·exp(η·r(a))`.
//! The suboptimality gap `J(π*) − J(π)` equals `KL(π ‖ π*) / η`, which is how
//! [`subopt_gap`] evaluates it: the direct difference of two `J` values
//! cancels badly when `π` is close to `π*`.
//!
//! Every softmax here runs in the log domain with the maximum logit
//! subtracted first, so `η·r` in the hundreds (or far beyond) is fine.

use crate::error::{Error, Result};
use crate::model::{BanditInstance, Policy};

/// `J(π)` split into its two components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveReport {
    /// `expected_reward − kl_penalty / eta`.
    pub value: f64,
    pub expected_reward: f64,
    /// `KL(π ‖ π_ref)`.
    pub kl_penalty: f64,
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

/// `KL(p ‖ q) = Σ_a p(a) log(p(a)/q(a))`, with `0·log 0 = 0`.
///
/// Fails with [`Error::NotAbsolutelyContinuous`] if `p(a) > 0 = q(a)` for
/// some arm instead of returning infinity.
pub fn kl_divergence(p: &Policy, q: &Policy) -> Result<f64> {
    check_len(p.num_arms(), q.num_arms())?;
    let mut acc = 0.0;
    for (a, (&pa, &qa)) in p.probs().iter().zip(q.probs()).enumerate() {
        if pa == 0.0 {
            continue;
        }
        if qa == 0.0 {
            return Err(Error::NotAbsolutelyContinuous { arm: a });
        }
        acc += pa * (pa.ln() - qa.ln());
    }
    // Rounding can leave a tiny negative value when p ≈ q.
    Ok(acc.max(0.0))
}

/// `KL(p ‖ q)` where `q` is given by its log-probabilities.
fn kl_to_log(p: &Policy, log_q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pa, &lq) in p.probs().iter().zip(log_q) {
        if pa > 0.0 {
            acc += pa * (pa.ln() - lq);
        }
    }
    acc.max(0.0)
}

pub fn regularized_value(inst: &BanditInstance, pi: &Policy) -> Result<ObjectiveReport> {
    check_len(inst.num_arms(), pi.num_arms())?;
    let expected_reward = pi.expect(inst.means());
    let kl_penalty = kl_divergence(pi, inst.reference())?;
    Ok(ObjectiveReport {
        value: expected_reward - kl_penalty / inst.eta(),
        expected_reward,
        kl_penalty,
    })
}

/// Log-probabilities of `π(a) ∝ reference(a)·exp(eta·scores(a))`.
pub fn log_softmax(reference: &Policy, scores: &[f64], eta: f64) -> Vec<f64> {
    debug_assert_eq!(reference.num_arms(), scores.len());
    let mut logits: Vec<f64> = reference
        .probs()
        .iter()
        .zip(scores)
        .map(|(&w, &s)| w.ln() + eta * s)
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    for l in &mut logits {
        *l -= max + log_z;
    }
    logits
}

/// The policy `π(a) ∝ reference(a)·exp(eta·scores(a))`.
pub fn softmax_policy(reference: &Policy, scores: &[f64], eta: f64) -> Policy {
    debug_assert_eq!(reference.num_arms(), scores.len());
    let logits: Vec<f64> = reference
        .probs()
        .iter()
        .zip(scores)
        .map(|(&w, &s)| w.ln() + eta * s)
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    // The max logit contributes exp(0) = 1, so the total is at least 1.
    Policy::from_weights(weights).expect("softmax weights are finite with a unit entry")
}

/// The maximizer of `J`: `π*(a) ∝ π_ref(a)·exp(η·r(a))`.
pub fn optimal_policy(inst: &BanditInstance) -> Policy {
    softmax_policy(inst.reference(), inst.means(), inst.eta())
}

/// `log π*(a)` for every arm, finite even when `π*(a)` underflows.
pub fn log_optimal_policy(inst: &BanditInstance) -> Vec<f64> {
    log_softmax(inst.reference(), inst.means(), inst.eta())
}

/// `J(π*) − J(π)`, evaluated as `KL(π ‖ π*) / η`.
pub fn subopt_gap(inst: &BanditInstance, pi: &Policy) -> Result<f64> {
    check_len(inst.num_arms(), pi.num_arms())?;
    Ok(GapEvaluator::new(inst).gap(pi))
}

/// `J(π*) − J(π)` as a difference of two objective values. Kept as an
/// independent cross-check of [`subopt_gap`].
pub fn subopt_gap_direct(inst: &BanditInstance, pi: &Policy) -> Result<f64> {
    let best = regularized_value(inst, &optimal_policy(inst))?;
    let here = regularized_value(inst, pi)?;
    Ok(best.value - here.value)
}

/// Suboptimality gaps against a fixed instance with `log π*` cached.
#[derive(Debug, Clone)]
pub struct GapEvaluator {
    log_opt: Vec<f64>,
    eta: f64,
}

impl GapEvaluator {
    pub fn new(inst: &BanditInstance) -> Self {
        Self {
            log_opt: log_optimal_policy(inst),
            eta: inst.eta(),
        }
    }

    pub fn log_optimal(&self) -> &[f64] {
        &self.log_opt
    }

    /// `KL(π ‖ π*) / η`. Panics in debug builds on an arm-count mismatch.
    #[inline]
    pub fn gap(&self, pi: &Policy) -> f64 {
        debug_assert_eq!(pi.num_arms(), self.log_opt.len());
        kl_to_log(pi, &self.log_opt) / self.eta
    }
}

/// `π̂(a) ∝ √(p(a)·q(a))`, the minimizer of `KL(π‖p) + KL(π‖q)`.
pub fn geometric_mean_policy(p: &Policy, q: &Policy) -> Result<Policy> {
    check_len(p.num_arms(), q.num_arms())?;
    if !p.is_strictly_positive() || !q.is_strictly_positive() {
        return Err(Error::InvalidPolicy(
            "geometric mean requires strictly positive policies".into(),
        ));
    }
    // Log domain: the product of two tiny probabilities may underflow.
    let half_logs: Vec<f64> = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(a, b)| 0.5 * (a.ln() + b.ln()))
        .collect();
    let max = half_logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Policy::from_weights(half_logs.iter().map(|l| (l - max).exp()).collect())
}
