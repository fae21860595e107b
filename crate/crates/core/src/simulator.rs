//! Seeded interaction loop and batch aggregation.
//!
//! A run plays exactly `T` rounds. Each round the agent emits `π_t`, one
//! uniform draw picks the action by inverse CDF, and one noise draw produces
//! the observed reward. Regret is the exact, noise-free
//! `Σ_t [J(π*) − J(π_t)]`; noise only reaches the agent.
//!
//! Alongside regret the simulator tracks
//! - whether `|f̂_t(a) − r(a)| ≤ b_t(a)` held for every round and arm
//!   (the optimism event), and
//! - the harmonic sum `Σ_t 1/(N_{t−1}(a_t) ∨ 1)`, which can never exceed
//!   `4·K·log T`.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::algorithms::{
    agent_step, bonus, empirical_means, optimistic_rewards, AgentKind, AgentParams, AgentState,
    Observation,
};
use crate::error::{Error, Result};
use crate::model::{validate_instance, BanditInstance, NoiseModel, Policy, RunConfig};
use crate::objective::GapEvaluator;
use crate::rng::{stream_rng, RUN_STREAM};

/// First `(round, arm)` at which the optimism event failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OptimismViolation {
    pub round: u64,
    pub arm: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// Per-round gap `J(π*) − J(π_t)`.
    pub step_gaps: Vec<f64>,
    /// Running sum of `step_gaps`.
    pub regret_curve: Vec<f64>,
    pub optimism_violated: bool,
    pub first_violation: Option<OptimismViolation>,
    pub harmonic_sum: f64,
    pub final_counts: Vec<u64>,
    pub seed: u64,
    /// Every emitted policy, when `record_policies` is set.
    pub policies: Option<Vec<Policy>>,
    /// Per-round `min_a [b_t(a) − |f̂_t(a) − r(a)|]`, when `record_policies`
    /// is set. Negative entries are optimism failures.
    pub optimism_margins: Option<Vec<f64>>,
}

impl RunRecord {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn final_regret(&self) -> f64 {
        self.regret_curve.last().copied().unwrap_or(0.0)
    }

    /// CSV with columns `step, action, reward, cum_regret`; steps are 1-based.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "action", "reward", "cum_regret"])?;
        for (i, ((a, r), c)) in self
            .actions
            .iter()
            .zip(&self.rewards)
            .zip(&self.regret_curve)
            .enumerate()
        {
            w.write_record([
                (i + 1).to_string(),
                a.to_string(),
                r.to_string(),
                c.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Whether the optimism event held throughout the run.
pub fn optimism_event_check(record: &RunRecord) -> bool {
    !record.optimism_violated
}

/// `4·K·log T`, the deterministic ceiling on the harmonic sum.
pub fn harmonic_bound(num_arms: usize, horizon: u64) -> f64 {
    4.0 * num_arms as f64 * (horizon as f64).ln()
}

pub fn run(
    inst: &BanditInstance,
    kind: AgentKind,
    cfg: &RunConfig,
    noise: NoiseModel,
) -> Result<RunRecord> {
    validate_instance(inst)?;
    cfg.validate()?;
    noise.check_compatible(inst)?;

    let horizon = inst.horizon();
    let k = inst.num_arms();
    let means = inst.means();
    let gaps = GapEvaluator::new(inst);
    let params = AgentParams::for_instance(inst, cfg)?;
    // Optimistic estimates span at most the clip width, which bounds how far
    // KL-UCB can push any arm below its reference mass.
    let ref_floor = inst.reference().min_prob() * (-inst.eta() * (cfg.clip.hi - cfg.clip.lo)).exp();
    let mut rng = stream_rng(cfg.seed, RUN_STREAM);

    let cap = horizon as usize;
    let mut actions = Vec::with_capacity(cap);
    let mut rewards = Vec::with_capacity(cap);
    let mut step_gaps = Vec::with_capacity(cap);
    let mut regret_curve = Vec::with_capacity(cap);
    let mut policies = cfg.record_policies.then(|| Vec::with_capacity(cap));
    let mut margins = cfg.record_policies.then(|| Vec::with_capacity(cap));
    let mut first_violation = None;
    let mut harmonic_sum = 0.0;
    let mut cumulative = 0.0;

    let mut state = AgentState::new(params);
    let mut last = None;
    for round in 0..horizon {
        let (next, policy) = agent_step(kind, state, last)?;
        state = next;

        // Optimism event at this round's statistics.
        let fhat = empirical_means(&state);
        let b = bonus(&state);
        let mut min_margin = f64::INFINITY;
        for a in 0..k {
            let margin = b[a] - (fhat[a] - means[a]).abs();
            min_margin = min_margin.min(margin);
            if margin < 0.0 && first_violation.is_none() {
                first_violation = Some(OptimismViolation { round, arm: a });
            }
        }
        if kind == AgentKind::KlUcb {
            if first_violation.is_none() {
                // Optimism on E(δ): clipped estimates dominate in-range means.
                debug_assert!(optimistic_rewards(&state)
                    .iter()
                    .zip(means)
                    .all(|(f, r)| !cfg.clip.contains(*r) || f >= r));
            }
            debug_assert!(policy.min_prob() >= ref_floor * (1.0 - 1e-9));
        }

        let gap = gaps.gap(&policy);
        if !gap.is_finite() {
            return Err(Error::NonFinite {
                step: round,
                what: "suboptimality gap",
            });
        }
        cumulative += gap;

        let action = policy.sample_with(rng.random::<f64>());
        harmonic_sum += 1.0 / state.counts()[action].max(1) as f64;
        let reward = noise.observe(means[action], &mut rng);
        if !reward.is_finite() {
            return Err(Error::NonFinite {
                step: round,
                what: "reward",
            });
        }

        actions.push(action);
        rewards.push(reward);
        step_gaps.push(gap);
        regret_curve.push(cumulative);
        if let Some(p) = policies.as_mut() {
            p.push(policy);
        }
        if let Some(m) = margins.as_mut() {
            m.push(min_margin);
        }
        last = Some(Observation { action, reward });
    }

    let mut final_counts = state.counts().to_vec();
    if let Some(obs) = last {
        final_counts[obs.action] += 1;
    }

    if horizon >= 2 && harmonic_sum > harmonic_bound(k, horizon) {
        return Err(Error::Invariant(format!(
            "harmonic sum {harmonic_sum} exceeds 4·K·log T = {}",
            harmonic_bound(k, horizon)
        )));
    }

    Ok(RunRecord {
        actions,
        rewards,
        step_gaps,
        regret_curve,
        optimism_violated: first_violation.is_some(),
        first_violation,
        harmonic_sum,
        final_counts,
        seed: cfg.seed,
        policies,
        optimism_margins: margins,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    pub mean_final_regret: f64,
    /// Standard error of the mean; 0 for a single seed.
    pub stderr_final_regret: f64,
    pub seeds: Vec<u64>,
    pub per_seed_final: Vec<f64>,
    pub per_seed_violated: Vec<bool>,
    pub optimism_failure_rate: f64,
    pub mean_regret_curve: Vec<f64>,
}

impl BatchSummary {
    /// CSV with columns `seed, final_regret, optimism_violated`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["seed", "final_regret", "optimism_violated"])?;
        for ((s, r), v) in self
            .seeds
            .iter()
            .zip(&self.per_seed_final)
            .zip(&self.per_seed_violated)
        {
            w.write_record([s.to_string(), r.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean and standard error of the mean (0 when fewer than two values).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs one seed per entry of `seeds` in parallel and aggregates in seed-list
/// order, so the result does not depend on scheduling.
pub fn run_batch(
    inst: &BanditInstance,
    kind: AgentKind,
    cfg_base: &RunConfig,
    noise: NoiseModel,
    seeds: &[u64],
) -> Result<BatchSummary> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("seed list must be nonempty".into()));
    }
    let records: Vec<Result<RunRecord>> = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = RunConfig {
                seed,
                record_policies: false,
                ..*cfg_base
            };
            run(inst, kind, &cfg, noise).map_err(|e| Error::Run {
                seed,
                source: Box::new(e),
            })
        })
        .collect();
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;

    let per_seed_final: Vec<f64> = records.iter().map(RunRecord::final_regret).collect();
    let per_seed_violated: Vec<bool> = records.iter().map(|r| r.optimism_violated).collect();
    let (mean, stderr) = mean_stderr(&per_seed_final);
    let failures = per_seed_violated.iter().filter(|&&v| v).count();

    let horizon = inst.horizon() as usize;
    let mut mean_curve = vec![0.0; horizon];
    for r in &records {
        for (m, c) in mean_curve.iter_mut().zip(&r.regret_curve) {
            *m += c;
        }
    }
    let n = records.len() as f64;
    for m in &mut mean_curve {
        *m /= n;
    }

    Ok(BatchSummary {
        mean_final_regret: mean,
        stderr_final_regret: stderr,
        seeds: seeds.to_vec(),
        per_seed_final,
        per_seed_violated,
        optimism_failure_rate: failures as f64 / n,
        mean_regret_curve: mean_curve,
    })
}
