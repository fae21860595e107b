//! Instance generators: the two hard families behind the lower bounds and
//! uniformly random benchmark instances.
//!
//! *Slow regime.* `K` instances with a uniform reference. Instance 1 has means
//! `(δ, 0, …, 0)`; instance `k ≥ 2` equals instance 1 except arm `k`, which is
//! raised to `2δ`. The gap is `δ = √(2K/T)`.
//!
//! *Fast regime.* `2K` arms. The first `K` have means `½ + x_i + μ_i·δ_t` with
//! `μ ∈ {±1}^K`, the last `K` sit at `½ + α` with `α = 2·ln 2 / η`. Drawing
//! `x` uniformly from the stripe set `H_t` and `μ` uniformly from the signs
//! is the same as drawing `x + μ·δ_t` uniformly from `[−α, α]^K`, which is
//! how [`fast_family_sample`] samples.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{BanditInstance, ClipRange, NoiseModel, Policy};
use crate::rng::stream_rng;

/// Smallest arm count for which the slow-regime lower bound applies.
pub const SLOW_FAMILY_MIN_ARMS: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct SlowFamily {
    /// `instances[0]` is the base instance, `instances[k]` raises arm `k`.
    pub instances: Vec<BanditInstance>,
    pub delta: f64,
}

impl SlowFamily {
    pub fn num_arms(&self) -> usize {
        self.instances.len()
    }

    /// Whether `K ≥ 9`, the range where the lower-bound constants hold.
    pub fn in_theorem_range(&self) -> bool {
        self.num_arms() >= SLOW_FAMILY_MIN_ARMS
    }
}

pub fn slow_hard_family(num_arms: usize, horizon: u64, eta: f64) -> Result<SlowFamily> {
    if num_arms < 2 {
        return Err(Error::InvalidArgument(
            "slow family needs at least 2 arms".into(),
        ));
    }
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let delta = (2.0 * num_arms as f64 / horizon as f64).sqrt();
    let mut base = vec![0.0; num_arms];
    base[0] = delta;
    let reference = Policy::uniform(num_arms);
    let mut instances = Vec::with_capacity(num_arms);
    instances.push(BanditInstance::new(
        base.clone(),
        eta,
        reference.clone(),
        horizon,
    )?);
    for k in 1..num_arms {
        let mut means = base.clone();
        means[k] = 2.0 * delta;
        instances.push(BanditInstance::new(means, eta, reference.clone(), horizon)?);
    }
    Ok(SlowFamily { instances, delta })
}

/// `δ_t = α / (2n)` with `n = ⌈α / (2√(K/t))⌉`.
///
/// Lies in `[½√(K/t), √(K/t)]` and makes `α / (2δ_t) = n` a positive integer
/// whenever `α·√(t/K) ≥ 1`.
pub fn delta_schedule(t: u64, num_arms: usize, alpha: f64) -> Result<f64> {
    let (n, delta) = stripe_count(t, num_arms, alpha)?;
    debug_assert!(n >= 1);
    Ok(delta)
}

fn stripe_count(t: u64, num_arms: usize, alpha: f64) -> Result<(u64, f64)> {
    if num_arms == 0 || t == 0 || !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(
            "delta_schedule needs t ≥ 1, K ≥ 1 and α > 0".into(),
        ));
    }
    let scale = (num_arms as f64 / t as f64).sqrt();
    if alpha / scale < 1.0 {
        return Err(Error::Precondition("t too small for this (K, α)".into()));
    }
    let n = (alpha / (2.0 * scale)).ceil().max(1.0);
    Ok((n as u64, alpha / (2.0 * n)))
}

/// One draw from the fast-regime prior at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FastFamilySample {
    /// First-parameter offsets, `‖x‖_∞ ≤ α − δ_t`.
    pub x: Vec<f64>,
    /// Sign pattern.
    pub mu: Vec<i8>,
    pub delta_t: f64,
    pub alpha: f64,
    /// The `2K`-arm instance; horizon is `t`.
    pub instance: BanditInstance,
}

impl FastFamilySample {
    /// The fast family is defined under standard Gaussian rewards.
    pub const NOISE: NoiseModel = NoiseModel::UnitGaussian;
}

/// `α = 2·ln 2 / η`.
pub fn fast_alpha(eta: f64) -> f64 {
    2.0 * std::f64::consts::LN_2 / eta
}

/// `[½ − α, ½ + α]`, the interval holding every fast-family mean.
pub fn fast_family_range(eta: f64) -> ClipRange {
    let alpha = fast_alpha(eta);
    ClipRange {
        lo: 0.5 - alpha,
        hi: 0.5 + alpha,
    }
}

/// Splits `u ∈ [−α, α]` into `(x, μ)` with `u = x + μ·δ` and `x` in the
/// stripe set `∪_{j=1..n} [−α + (4j−3)δ, −α + (4j−1)δ]`, `n = α/(2δ)`.
pub fn split_offset(u: f64, delta: f64, alpha: f64) -> (f64, i8) {
    let stripes = (alpha / (2.0 * delta)).round().max(1.0);
    let block = ((u + alpha) / (4.0 * delta))
        .floor()
        .clamp(0.0, stripes - 1.0);
    let within = u + alpha - 4.0 * delta * block;
    let (x, mu) = if within < 2.0 * delta {
        (u + delta, -1)
    } else {
        (u - delta, 1)
    };
    (x.clamp(-(alpha - delta), alpha - delta), mu)
}

/// Means `½ + x_i + μ_i·δ` for the first `K` arms and `½ + α` for the rest.
pub fn fast_means(x: &[f64], mu: &[i8], delta: f64, alpha: f64) -> Vec<f64> {
    let mut means: Vec<f64> = x
        .iter()
        .zip(mu)
        .map(|(&xi, &m)| 0.5 + xi + f64::from(m) * delta)
        .collect();
    means.extend(std::iter::repeat_n(0.5 + alpha, x.len()));
    means
}

pub fn fast_family_sample(
    num_arms: usize,
    eta: f64,
    t: u64,
    seed: u64,
) -> Result<FastFamilySample> {
    if num_arms == 0 {
        return Err(Error::InvalidArgument("fast family needs K ≥ 1".into()));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidArgument("eta must be positive".into()));
    }
    if (t as f64) < eta * eta * num_arms as f64 {
        return Err(Error::Precondition(format!(
            "fast family needs t ≥ η²K = {}",
            eta * eta * num_arms as f64
        )));
    }
    let alpha = fast_alpha(eta);
    let delta_t = delta_schedule(t, num_arms, alpha)?;
    let mut rng = stream_rng(seed, 0);
    let (x, mu): (Vec<f64>, Vec<i8>) = (0..num_arms)
        .map(|_| split_offset(rng.random_range(-alpha..=alpha), delta_t, alpha))
        .unzip();
    let means = fast_means(&x, &mu, delta_t, alpha);
    let instance = BanditInstance::with_uniform_reference(means, eta, t)?;
    Ok(FastFamilySample {
        x,
        mu,
        delta_t,
        alpha,
        instance,
    })
}

/// Two fast-family instances sharing `x`, `δ` and `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct InstancePair {
    pub first: BanditInstance,
    pub second: BanditInstance,
    pub delta: f64,
    pub alpha: f64,
    /// Hamming distance between the two sign patterns.
    pub hamming: usize,
}

pub fn hamming_distance(a: &[i8], b: &[i8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

fn check_signs(mu: &[i8], name: &str) -> Result<()> {
    if mu.iter().any(|&m| m != 1 && m != -1) {
        return Err(Error::Precondition(format!("{name} must contain only ±1")));
    }
    Ok(())
}

pub fn paired_instances(
    x: &[f64],
    mu1: &[i8],
    mu2: &[i8],
    delta: f64,
    eta: f64,
    alpha: f64,
    horizon: u64,
) -> Result<InstancePair> {
    let k = x.len();
    if k == 0 {
        return Err(Error::InvalidArgument("x must be nonempty".into()));
    }
    if mu1.len() != k {
        return Err(Error::LengthMismatch {
            expected: k,
            got: mu1.len(),
        });
    }
    if mu2.len() != k {
        return Err(Error::LengthMismatch {
            expected: k,
            got: mu2.len(),
        });
    }
    check_signs(mu1, "mu1")?;
    check_signs(mu2, "mu2")?;
    if !(delta > 0.0) {
        return Err(Error::Precondition("delta must be positive".into()));
    }
    if alpha < 2.0 * delta {
        return Err(Error::Precondition(format!(
            "alpha = {alpha} must be at least 2·delta = {}",
            2.0 * delta
        )));
    }
    let bound = alpha - delta;
    if let Some(i) = x.iter().position(|xi| xi.abs() > bound) {
        return Err(Error::Precondition(format!(
            "|x[{i}]| = {} exceeds alpha − delta = {bound}",
            x[i].abs()
        )));
    }
    let first =
        BanditInstance::with_uniform_reference(fast_means(x, mu1, delta, alpha), eta, horizon)?;
    let second =
        BanditInstance::with_uniform_reference(fast_means(x, mu2, delta, alpha), eta, horizon)?;
    Ok(InstancePair {
        first,
        second,
        delta,
        alpha,
        hamming: hamming_distance(mu1, mu2),
    })
}

/// Means i.i.d. `Unif[0,1]` with a uniform reference.
pub fn random_instance(
    num_arms: usize,
    eta: f64,
    horizon: u64,
    seed: u64,
) -> Result<BanditInstance> {
    let mut rng = stream_rng(seed, 0);
    random_instance_with(num_arms, eta, horizon, &mut rng)
}

pub fn random_instance_with<R: Rng + ?Sized>(
    num_arms: usize,
    eta: f64,
    horizon: u64,
    rng: &mut R,
) -> Result<BanditInstance> {
    let means = (0..num_arms).map(|_| rng.random::<f64>()).collect();
    BanditInstance::with_uniform_reference(means, eta, horizon)
}
